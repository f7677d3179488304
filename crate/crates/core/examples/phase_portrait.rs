//! Phase portrait `(θ̂, Γ̂)` of the full and averaged Newton ESC from the
//! initial states of the shipped `fig2.json` preset.
//!
//! ```text
//! cargo run --release --example phase_portrait [out_dir]
//! ```

use std::fs;
use std::path::PathBuf;

use esc_lab::config::RunConfig;
use esc_lab::dynamics::NescSystem;
use esc_lab::integrator::{IntegrationSpec, Integrator};
use esc_lab::output::{svg_plot, thin, write_trajectory_csv, Series};
use esc_lab::scalar_maps::MapRegistry;

fn main() -> esc_lab::Result<()> {
    let preset = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets/fig2.json");
    let cfg = RunConfig::load(&preset)?;
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| cfg.out.clone());
    fs::create_dir_all(&out)?;

    let sys = NescSystem::new(MapRegistry::default().get(&cfg.map)?, cfg.params, cfg.options.quadrature.build()?)?;
    let eq = sys.clone().with_equilibrium(1e-12)?;
    let integrator = Integrator::new(cfg.integration_spec())?.with_guard(Some(1)).resolving_dither(cfg.params.omega())?;
    // The averaged system is autonomous and slow, so it gets a coarse step.
    let coarse = IntegrationSpec { dt: 0.5, t_final: cfg.integration.t_final, record_every: 1 };
    let averaged = Integrator::new(coarse)?.with_guard(Some(1));

    let mut labels = Vec::new();
    let mut curves = Vec::new();
    for (i, x0) in cfg.initial_states.iter().enumerate() {
        let x0 = [x0[0], x0[1]];
        let full = integrator.run(|t, x: &[f64; 2]| sys.full_rhs(t, *x), x0)?.with_names(&["theta_hat", "Gamma_hat"]);
        let avg = averaged.run(|_, x: &[f64; 2]| sys.avg_rhs(*x), x0)?.with_names(&["theta_bar", "gamma_bar"]);
        write_trajectory_csv(&full, &out.join(format!("phase_full_ic{i}.csv")))?;
        write_trajectory_csv(&avg, &out.join(format!("phase_avg_ic{i}.csv")))?;
        println!("ic{i} {x0:?}: full ends at {:?}, averaged ends at {:?}", full.final_state, avg.final_state);
        for (kind, traj) in [("full", &full), ("avg", &avg)] {
            labels.push(format!("{kind} ic{i}"));
            curves.push(thin(traj.samples().map(|(_, x)| (x[0], x[1])).collect(), 2000));
        }
    }
    let series: Vec<Series> = labels.iter().zip(curves).map(|(label, points)| Series { label, points }).collect();
    fs::write(out.join("phase_portrait.svg"), svg_plot("Newton ESC phase portrait", "theta_hat", "Gamma_hat", &series))?;
    println!("equilibrium ({:.6}, {:.6}); files in {}", eq.theta_bar_star(), eq.gamma_star(), out.display());
    Ok(())
}
