//! File-emitting front ends, one per CLI subcommand. Each takes a validated
//! [`RunConfig`], writes its outputs under `config.out`, and returns the
//! structured result it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{AverageRow, EquilibriumResult};
use crate::config::RunConfig;
use crate::dynamics::{CoordSystem, ErrorStateGamma, ErrorStateLog, ErrorSystem, EscParams, NescSystem};
use crate::error::{invalid, Result};
use crate::integrator::{DomainExit, IntegrationSpec, Integrator, Trajectory, TrajectoryMeta};
use crate::output::{fmt_f64, fmt_opt, svg_plot, thin, write_json, write_trajectory_csv, CsvSink, Series};
use crate::quadrature::PeriodicRule;
use crate::scalar_maps::{MapDefinition, MapRegistry};
use crate::stability::{
    linearize, linearize_gesc, lyapunov_grid, practical_stability_sweep, GescLinearization, Linearization,
    LyapunovCertificate, LyapunovGridReport, PracticalStabilityReport, SweepSpec,
};
use crate::verify::{run_suite, VerifyReport};

fn prepare(cfg: &RunConfig, registry: &MapRegistry) -> Result<(NescSystem, PeriodicRule)> {
    cfg.validate(registry)?;
    fs::create_dir_all(&cfg.out)?;
    let rule = cfg.options.quadrature.build()?;
    let sys = NescSystem::new(registry.get(&cfg.map)?, cfg.params, rule.clone())?;
    Ok((sys, rule))
}

fn path_in(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

/// Last time `|θ − θ̄*|` was at or above `threshold`; the error stays below
/// it afterwards. `None` if it never reached the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettlingTime {
    pub threshold: f64,
    pub last_time_above: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub ic_index: usize,
    pub initial_state: Vec<f64>,
    pub file: PathBuf,
    pub t_end: f64,
    pub final_state: Vec<f64>,
    /// `θ − θ̄*` at the end of the run (or `θ̃` in error coordinates).
    pub final_theta_error: Option<f64>,
    /// `Γ − Γ̄*` at the end of the run, for NESC coordinates.
    pub final_gamma_error: Option<f64>,
    pub settling: Vec<SettlingTime>,
    pub domain_exit: Option<DomainExit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub map: String,
    pub coords: CoordSystem,
    pub params: EscParams,
    pub integration: IntegrationSpec,
    pub theta_bar_star: Option<f64>,
    pub gamma_star: Option<f64>,
    pub runs: Vec<RunSummary>,
}

impl SimulationSummary {
    pub fn all_ok(&self) -> bool {
        self.runs.iter().all(|r| r.domain_exit.is_none())
    }
}

/// How the error of one state is measured against `(θ̄*, Γ̄*)`.
#[derive(Clone, Copy)]
struct Target {
    theta: Option<f64>,
    gamma: Option<f64>,
    /// State already in error coordinates.
    relative: bool,
}

impl Target {
    fn theta_error(&self, x: &[f64]) -> Option<f64> {
        if self.relative {
            Some(x[0])
        } else {
            self.theta.map(|t| x[0] - t)
        }
    }

    fn gamma_error(&self, coords: CoordSystem, x: &[f64]) -> Option<f64> {
        match coords {
            CoordSystem::Full | CoordSystem::Avg => self.gamma.map(|g| x[1] - g),
            CoordSystem::ErrGamma => Some(x[1]),
            CoordSystem::ErrLog => None,
            _ => None,
        }
    }
}

fn run_one<const N: usize, F, Y>(
    integrator: &Integrator,
    rhs: F,
    x0: [f64; N],
    output: Option<Y>,
    target: Target,
    thresholds: &[f64],
) -> Result<(Trajectory, Vec<SettlingTime>)>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    Y: Fn(f64, &[f64; N]) -> f64,
{
    let mut last_above: Vec<Option<f64>> = vec![None; thresholds.len()];
    let traj = integrator.run_observed(rhs, x0, output, |_, t, x| {
        if let Some(e) = target.theta_error(x) {
            for (slot, &thr) in last_above.iter_mut().zip(thresholds) {
                if e.abs() >= thr {
                    *slot = Some(t);
                }
            }
        }
    })?;
    let settling = thresholds.iter().zip(last_above).map(|(&threshold, last_time_above)| SettlingTime { threshold, last_time_above }).collect();
    Ok((traj, settling))
}

fn simulate_ic(cfg: &RunConfig, sys: &NescSystem, err: Option<&ErrorSystem>, x0: &[f64]) -> Result<(Trajectory, Vec<SettlingTime>)> {
    let spec = cfg.integration_spec();
    let mut integrator = Integrator::new(spec)?.with_guard(cfg.coords.guard());
    if cfg.coords.is_full() {
        integrator = integrator.resolving_dither(cfg.params.omega())?;
    }
    let target = Target {
        theta: err.map(|e| e.theta_bar_star()),
        gamma: err.map(|e| e.gamma_star()),
        relative: cfg.coords.needs_equilibrium(),
    };
    let th = &cfg.options.thresholds;
    let no_output = None::<fn(f64, &[f64; 2]) -> f64>;
    let no_output1 = None::<fn(f64, &[f64; 1]) -> f64>;
    let need_err = || err.ok_or_else(|| invalid("error coordinates need the averaged equilibrium"));
    let (traj, settling) = match cfg.coords {
        CoordSystem::Full => run_one(
            &integrator,
            |t, x: &[f64; 2]| sys.full_rhs(t, *x),
            [x0[0], x0[1]],
            Some(|t: f64, x: &[f64; 2]| sys.output(t, x[0])),
            target,
            th,
        )?,
        CoordSystem::Avg => run_one(&integrator, |_t, x: &[f64; 2]| sys.avg_rhs(*x), [x0[0], x0[1]], no_output, target, th)?,
        CoordSystem::ErrLog => {
            let e = need_err()?;
            run_one(
                &integrator,
                |_t, x: &[f64; 2]| Ok(e.log_error_avg_rhs(ErrorStateLog { theta_err: x[0], gamma_err: x[1] })),
                [x0[0], x0[1]],
                no_output,
                target,
                th,
            )?
        }
        CoordSystem::ErrGamma => {
            let e = need_err()?;
            run_one(
                &integrator,
                |_t, x: &[f64; 2]| e.gamma_error_avg_rhs(ErrorStateGamma { theta_err: x[0], inv_hessian_err: x[1] }),
                [x0[0], x0[1]],
                no_output,
                target,
                th,
            )?
        }
        CoordSystem::GescModel => run_one(&integrator, |_t, x: &[f64; 1]| Ok([sys.gesc_model_rhs(x[0])]), [x0[0]], no_output1, target, th)?,
        CoordSystem::GescFull => run_one(
            &integrator,
            |t, x: &[f64; 1]| Ok([sys.gesc_full_rhs(t, x[0])]),
            [x0[0]],
            Some(|t: f64, x: &[f64; 1]| sys.output(t, x[0])),
            target,
            th,
        )?,
        CoordSystem::GescAvg => run_one(&integrator, |_t, x: &[f64; 1]| Ok([sys.gesc_avg_rhs(x[0])]), [x0[0]], no_output1, target, th)?,
    };
    let traj = traj.with_names(cfg.coords.component_names()).with_meta(TrajectoryMeta {
        coord_system: Some(cfg.coords),
        params: Some(cfg.params),
        map_name: Some(cfg.map.clone()),
    });
    Ok((traj, settling))
}

fn trajectory_svg(traj: &Trajectory, title: &str, path: &Path) -> Result<()> {
    let series: Vec<Series> = traj
        .component_names
        .iter()
        .enumerate()
        .map(|(j, name)| Series { label: name, points: thin(traj.samples().map(|(t, x)| (t, x[j])).collect(), 2000) })
        .collect();
    fs::write(path, svg_plot(title, "t", "state", &series))?;
    Ok(())
}

/// Integrates every initial state in `cfg.coords`, writing `ic<i>.csv` per
/// run and `summary.json`.
pub fn cmd_simulate(cfg: &RunConfig, registry: &MapRegistry) -> Result<SimulationSummary> {
    let (sys, _) = prepare(cfg, registry)?;
    if cfg.initial_states.is_empty() {
        return Err(invalid("simulate needs at least one initial state"));
    }
    let err = match sys.clone().with_equilibrium(cfg.options.equilibrium_tol) {
        Ok(e) => Some(e),
        Err(e) if cfg.coords.needs_equilibrium() => return Err(e),
        Err(_) => None,
    };
    let results: Vec<Result<(Trajectory, Vec<SettlingTime>)>> =
        cfg.initial_states.par_iter().map(|x0| simulate_ic(cfg, &sys, err.as_ref(), x0)).collect();
    let target = Target { theta: err.as_ref().map(|e| e.theta_bar_star()), gamma: err.as_ref().map(|e| e.gamma_star()), relative: cfg.coords.needs_equilibrium() };
    let mut runs = Vec::with_capacity(results.len());
    for (i, result) in results.into_iter().enumerate() {
        let (traj, settling) = result?;
        let file = path_in(cfg, &format!("ic{i}.csv"));
        write_trajectory_csv(&traj, &file)?;
        if cfg.options.svg {
            trajectory_svg(&traj, &format!("{} {} ic{i}", cfg.map, cfg.coords), &file.with_extension("svg"))?;
        }
        runs.push(RunSummary {
            ic_index: i,
            initial_state: cfg.initial_states[i].clone(),
            file,
            t_end: traj.t_end,
            final_theta_error: target.theta_error(&traj.final_state),
            final_gamma_error: target.gamma_error(cfg.coords, &traj.final_state),
            final_state: traj.final_state.clone(),
            settling,
            domain_exit: traj.domain_exit.clone(),
        });
    }
    let summary = SimulationSummary {
        map: cfg.map.clone(),
        coords: cfg.coords,
        params: cfg.params,
        integration: cfg.integration_spec(),
        theta_bar_star: target.theta,
        gamma_star: target.gamma,
        runs,
    };
    write_json(&summary, &path_in(cfg, "summary.json"))?;
    Ok(summary)
}

/// Writes `average_table.csv` over `options.table`.
pub fn cmd_average_table(cfg: &RunConfig, registry: &MapRegistry) -> Result<Vec<AverageRow>> {
    let (sys, _) = prepare(cfg, registry)?;
    let rows: Vec<AverageRow> = cfg.options.table.points().into_iter().map(|t| sys.averaged().table_row(t)).collect();
    let header: Vec<&str> = AverageRow::HEADER.split(',').collect();
    let mut sink = CsvSink::create(&path_in(cfg, "average_table.csv"), &header)?;
    for r in &rows {
        sink.row(&r.values())?;
    }
    sink.finish()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOutput {
    pub map: String,
    pub a: f64,
    pub tol: f64,
    #[serde(flatten)]
    pub result: EquilibriumResult,
}

/// Writes `equilibrium.json`.
pub fn cmd_equilibrium(cfg: &RunConfig, registry: &MapRegistry) -> Result<EquilibriumOutput> {
    let (sys, _) = prepare(cfg, registry)?;
    let result = sys.averaged().find_equilibrium(cfg.options.equilibrium_tol)?;
    let out = EquilibriumOutput { map: cfg.map.clone(), a: cfg.params.a(), tol: cfg.options.equilibrium_tol, result };
    write_json(&out, &path_in(cfg, "equilibrium.json"))?;
    Ok(out)
}

/// Runs the property suite and writes `verify.json`.
pub fn cmd_verify(cfg: &RunConfig, registry: &MapRegistry) -> Result<VerifyReport> {
    let (_, rule) = prepare(cfg, registry)?;
    let report = run_suite(registry, cfg.params, &rule, &cfg.options.verify, &cfg.options.lyapunov_grid)?;
    write_json(&report, &path_in(cfg, "verify.json"))?;
    Ok(report)
}

/// Writes `lyapunov_grid.csv` (every point) and `lyapunov_grid.json`.
pub fn cmd_lyapunov_grid(cfg: &RunConfig, registry: &MapRegistry) -> Result<LyapunovGridReport> {
    let (sys, _) = prepare(cfg, registry)?;
    let cert = LyapunovCertificate::with_default_beta(sys.with_equilibrium(cfg.options.equilibrium_tol)?);
    let report = lyapunov_grid(&cert, &cfg.options.lyapunov_grid)?;
    let mut sink = CsvSink::create(&path_in(cfg, "lyapunov_grid.csv"), &["theta_err", "gamma_err", "V", "V_dot", "beta_factor"])?;
    for s in &report.samples {
        sink.row(&[s.theta_err, s.gamma_err, s.v, s.v_dot, s.beta_factor])?;
    }
    sink.finish()?;
    write_json(&report, &path_in(cfg, "lyapunov_grid.json"))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizeOutput {
    pub map: String,
    pub params: EscParams,
    pub nesc: Linearization,
    pub gesc: Option<GescLinearization>,
}

/// Writes `linearization.json`.
pub fn cmd_linearize(cfg: &RunConfig, registry: &MapRegistry) -> Result<LinearizeOutput> {
    let (sys, _) = prepare(cfg, registry)?;
    let err = sys.with_equilibrium(cfg.options.equilibrium_tol)?;
    let out = LinearizeOutput { map: cfg.map.clone(), params: cfg.params, nesc: linearize(&err)?, gesc: linearize_gesc(&err).ok() };
    write_json(&out, &path_in(cfg, "linearization.json"))?;
    Ok(out)
}

/// Header of `sweep.csv`.
pub const SWEEP_HEADER: [&str; 6] = ["omega", "ic_index", "tail_radius", "entry_time", "fit_M", "fit_lambda"];

/// Runs the ω-sweep over `options.sweep.omegas` with horizon `t_final`;
/// writes `sweep.csv` and `sweep.json`.
pub fn cmd_sweep(cfg: &RunConfig, registry: &MapRegistry) -> Result<PracticalStabilityReport> {
    let (sys, _) = prepare(cfg, registry)?;
    if cfg.initial_states.iter().any(|x| x.len() != 2) {
        return Err(invalid("sweep initial states are (theta_hat, Gamma_hat) pairs"));
    }
    let err = sys.with_equilibrium(cfg.options.equilibrium_tol)?;
    let opts = &cfg.options.sweep;
    let spec = SweepSpec {
        target_radius: opts.target_radius,
        steps_per_period: opts.steps_per_period,
        ..SweepSpec::new(opts.omegas.clone(), cfg.initial_states.iter().map(|x| [x[0], x[1]]).collect(), cfg.integration.t_final)
    };
    let report = practical_stability_sweep(&err, &spec)?;
    let mut sink = CsvSink::create(&path_in(cfg, "sweep.csv"), &SWEEP_HEADER)?;
    for r in &report.runs {
        sink.fields([fmt_f64(r.omega), r.ic_index.to_string(), fmt_opt(r.tail_radius), fmt_opt(r.entry_time), fmt_opt(r.fit_m), fmt_opt(r.fit_lambda)])?;
    }
    sink.finish()?;
    write_json(&report, &path_in(cfg, "sweep.json"))?;
    Ok(report)
}

/// Writes `maps.json` with every registered map definition.
pub fn cmd_maps(out: &Path, registry: &MapRegistry) -> Result<Vec<MapDefinition>> {
    fs::create_dir_all(out)?;
    let defs = registry.definitions();
    write_json(&defs, &out.join("maps.json"))?;
    Ok(defs)
}
