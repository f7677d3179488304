use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use esc_lab::commands;
use esc_lab::config::{Overrides, RunConfig};
use esc_lab::dynamics::CoordSystem;
use esc_lab::output::fmt_f64;
use esc_lab::scalar_maps::MapRegistry;

/// Gradient and Newton extremum seeking lab.
///
/// Settings come from `--config` (a JSON RunConfig) when given, otherwise
/// from the built-in defaults; any flag below overrides either.
#[derive(Parser)]
#[command(name = "esc-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate each initial state and write ic<i>.csv plus summary.json
    Simulate(Common),
    /// Tabulate averaged estimates and bounds over the configured grid
    AverageTable(Common),
    /// Solve for the averaged equilibrium
    Equilibrium(Common),
    /// Run the property suite; exits nonzero if any property fails
    Verify(Common),
    /// Evaluate the Lyapunov function and its derivative on a grid
    LyapunovGrid(Common),
    /// Linearize the averaged error system at its equilibrium
    Linearize(Common),
    /// Sweep the dither frequency and measure practical stability
    Sweep(Common),
    /// Export the registered map definitions
    Maps(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    map: Option<String>,
    /// One of full, avg, err-log, err-gamma, gesc-model, gesc-full, gesc-avg
    #[arg(long)]
    coords: Option<CoordSystem>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long = "omega-l")]
    omega_l: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
}

impl Common {
    fn resolve(&self) -> esc_lab::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&Overrides {
            map: self.map.clone(),
            coords: self.coords,
            out: self.out.clone(),
            a: self.a,
            omega: self.omega,
            k: self.k,
            omega_l: self.omega_l,
            dt: self.dt,
            t_final: self.t_final,
        });
        Ok(cfg)
    }
}

/// `println!` that stops quietly when stdout is closed, e.g. piped to `head`.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn run(command: Command) -> esc_lab::Result<bool> {
    let registry = MapRegistry::default();
    match command {
        Command::Simulate(c) => {
            let cfg = c.resolve()?;
            let s = commands::cmd_simulate(&cfg, &registry)?;
            if let (Some(t), Some(g)) = (s.theta_bar_star, s.gamma_star) {
                say!("theta_bar_star = {}, Gamma_bar_star = {}", fmt_f64(t), fmt_f64(g));
            }
            for r in &s.runs {
                match &r.domain_exit {
                    Some(exit) => eprintln!("ic{}: left the domain at t = {}", r.ic_index, exit.t),
                    None => {
                        let settled: Vec<String> = r
                            .settling
                            .iter()
                            .map(|st| format!("|err| < {} after t = {}", st.threshold, st.last_time_above.map_or("0".into(), |t| t.to_string())))
                            .collect();
                        say!("ic{}: {} -> {}", r.ic_index, r.file.display(), settled.join(", "));
                    }
                }
            }
            Ok(s.all_ok())
        }
        Command::AverageTable(c) => {
            let cfg = c.resolve()?;
            let rows = commands::cmd_average_table(&cfg, &registry)?;
            say!("{} rows -> {}", rows.len(), cfg.out.join("average_table.csv").display());
            Ok(true)
        }
        Command::Equilibrium(c) => {
            let cfg = c.resolve()?;
            let e = commands::cmd_equilibrium(&cfg, &registry)?;
            say!("theta_bar_star = {}", fmt_f64(e.result.theta_bar_star));
            say!("Gamma_bar_star = {}", fmt_f64(e.result.gamma_star));
            say!("residual = {}", fmt_f64(e.result.residual));
            Ok(true)
        }
        Command::Verify(c) => {
            let cfg = c.resolve()?;
            let report = commands::cmd_verify(&cfg, &registry)?;
            for p in &report.properties {
                say!("{} {} (worst {} at {:?})", if p.pass { "PASS" } else { "FAIL" }, p.name, fmt_f64(p.worst_value), p.worst_point);
            }
            Ok(report.all_pass)
        }
        Command::LyapunovGrid(c) => {
            let cfg = c.resolve()?;
            let r = commands::cmd_lyapunov_grid(&cfg, &registry)?;
            say!(
                "beta = {}, {} points, min V = {}, max V_dot = {}, violations = {}",
                fmt_f64(r.beta_used),
                r.points_checked,
                fmt_f64(r.min_v),
                fmt_f64(r.max_v_dot),
                r.violations.len()
            );
            Ok(r.passed())
        }
        Command::Linearize(c) => {
            let cfg = c.resolve()?;
            let l = commands::cmd_linearize(&cfg, &registry)?;
            say!("eig_theta = {}", fmt_f64(l.nesc.eig_theta));
            say!("eig_gamma = {}", fmt_f64(l.nesc.eig_gamma));
            Ok(true)
        }
        Command::Sweep(c) => {
            let cfg = c.resolve()?;
            let r = commands::cmd_sweep(&cfg, &registry)?;
            for (w, rad) in r.omegas.iter().zip(&r.radius) {
                say!("omega = {w}: tail radius {}", fmt_f64(*rad));
            }
            say!("monotone_radius = {}", r.monotone_radius);
            Ok(r.runs.iter().all(|run| run.failure.is_none()))
        }
        Command::Maps(c) => {
            let cfg = c.resolve()?;
            for d in commands::cmd_maps(&cfg.out, &registry)? {
                say!("{}: {}", d.name, d.formula);
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
