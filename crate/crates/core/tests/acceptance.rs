//! Acceptance criteria for the lab. Each test prints one `PASS`/`FAIL` line
//! to the real stdout (bypassing libtest capture) and then asserts.

use std::io::Write;
use std::path::Path;

use esc_lab::averaging::AveragedMap;
use esc_lab::commands::cmd_simulate;
use esc_lab::config::{LineGrid, RunConfig};
use esc_lab::dynamics::{EscParams, NescSystem};
use esc_lab::quadrature::PeriodicRule;
use esc_lab::scalar_maps::{builtin_map, MapRegistry};
use esc_lab::stability::{
    default_beta, linearize_gesc, linearize_map, practical_stability_sweep, GridSpec, LyapunovCertificate, SweepSpec,
};
use esc_lab::verify::{averaging_consistency, lyapunov_checks, proposition_checks, quadratic_exactness};

const SEED: u64 = 20_240_601;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[acceptance {id}] {verdict} {name}: {detail}");
}

fn paper_params() -> EscParams {
    EscParams::new(0.5, 10.0, 0.001, 0.001).unwrap()
}

fn paper_error_system() -> esc_lab::dynamics::ErrorSystem {
    NescSystem::new(builtin_map("paper-example").unwrap(), paper_params(), PeriodicRule::default())
        .unwrap()
        .with_equilibrium(1e-14)
        .unwrap()
}

#[test]
fn criterion_1_time_history_settles() {
    let preset = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets/fig3.json");
    let mut cfg = RunConfig::load(&preset).unwrap();
    let dir = tempfile::tempdir().unwrap();
    cfg.out = dir.path().to_path_buf();
    cfg.options.svg = false;
    let period = 2.0 * std::f64::consts::PI / 10.0;
    let (_, dt) = cfg.integration_spec().steps();
    // The step is shrunk slightly so that it divides t_final exactly.
    assert!((dt / (period / 200.0) - 1.0).abs() < 1e-6, "dt = {dt}");

    let summary = cmd_simulate(&cfg, &MapRegistry::default()).unwrap();
    let mut pass = summary.runs.len() == 2;
    let mut details = Vec::new();
    for run in &summary.runs {
        let last = |thr: f64| {
            run.settling.iter().find(|s| s.threshold == thr).map(|s| s.last_time_above.unwrap_or(0.0)).unwrap_or(f64::INFINITY)
        };
        let (t2, t3) = (last(1e-2), last(1e-3));
        pass &= run.domain_exit.is_none() && run.t_end == 1e4 && t2 <= 8000.0;
        details.push(format!("ic{} last |err| >= 1e-2 at t = {t2:.1}, >= 1e-3 at t = {t3:.1}", run.ic_index));
    }
    report(1, "time history stays within 1e-2 after t = 8000", pass, &details.join("; "));
    assert!(pass, "{details:?}");
}

#[test]
fn criterion_2_quadratic_exactness() {
    let rule = PeriodicRule::default();
    let exact = quadratic_exactness(&[0.1, 0.5, 2.0], &rule).unwrap();
    let mut worst_lin = 0.0f64;
    for (k, omega_l) in [(1.0, 0.001), (0.3, 2.0), (0.001, 0.001), (5.0, 0.25)] {
        for a in [0.1, 0.5, 2.0] {
            let params = EscParams::new(a, 10.0, k, omega_l).unwrap();
            let lin = linearize_map(builtin_map("quadratic").unwrap(), params, rule.clone(), 1e-14).unwrap();
            worst_lin = worst_lin.max((lin.eig_theta + k).abs()).max((lin.eig_gamma + omega_l).abs());
        }
    }
    let pass = exact.pass && worst_lin < 1e-12;
    report(
        2,
        "quadratic map averages exactly and linearizes to (-k, -omega_l)",
        pass,
        &format!("max estimate error {:.3e}, max eigenvalue error {worst_lin:.3e}", exact.worst_value),
    );
    assert!(pass);
}

#[test]
fn criterion_3_averaged_estimate_properties() {
    let rule = PeriodicRule::default();
    let grid = LineGrid { lo: -3.0, hi: 3.0, n: 61 };
    let mut failures = Vec::new();
    let mut checked = 0;
    for name in ["paper-example", "quartic"] {
        let map = builtin_map(name).unwrap();
        for a in [0.1, 0.5, 1.0] {
            for r in proposition_checks(&map, a, &grid, &rule).unwrap() {
                checked += 1;
                if !r.pass {
                    failures.push(format!("{} worst {:e} at {:?}", r.name, r.worst_value, r.worst_point));
                }
            }
        }
    }
    let pass = failures.is_empty();
    report(3, "averaged estimate properties on 61 points", pass, &format!("{checked} checks, {} violations", failures.len()));
    assert!(pass, "{failures:#?}");
}

/// Sign change of `f` located by two nested uniform scans of `n` points.
fn dense_scan_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let scan = |lo: f64, hi: f64| {
        let h = (hi - lo) / (n - 1) as f64;
        let mut prev = (lo, f(lo));
        for i in 1..n {
            let t = lo + h * i as f64;
            let v = f(t);
            if prev.1 < 0.0 && v >= 0.0 {
                return (prev.0, t);
            }
            prev = (t, v);
        }
        panic!("no sign change on [{lo}, {hi}]");
    };
    let (a, b) = scan(lo, hi);
    let (a, b) = scan(a, b);
    0.5 * (a + b)
}

#[test]
fn criterion_4_equilibrium_bracket() {
    let mut pass = true;
    let mut details = Vec::new();
    for (name, a) in [("paper-example", 0.5), ("paper-example", 0.1), ("paper-example", 1.0), ("quartic", 0.5)] {
        let avg = AveragedMap::new(builtin_map(name).unwrap(), a, PeriodicRule::default()).unwrap();
        let theta_star = avg.map().known_minimizer().unwrap();
        let eq = avg.find_equilibrium(1e-12).unwrap();
        let oracle = dense_scan_root(|t| avg.gradient(t), theta_star - a, theta_star + a, 10_000);
        let inside = eq.theta_bar_star > theta_star - a && eq.theta_bar_star < theta_star + a;
        let gap = (eq.theta_bar_star - oracle).abs();
        pass &= inside && eq.residual < 1e-10 && gap < 1e-8;
        details.push(format!("{name} a={a}: theta_bar_star {:.12}, residual {:.1e}, oracle gap {gap:.1e}", eq.theta_bar_star, eq.residual));
    }
    report(4, "equilibrium inside the bracket and matching a dense scan", pass, &details.join("; "));
    assert!(pass, "{details:#?}");
}

#[test]
fn criterion_5_lyapunov_certificate() {
    let cert = LyapunovCertificate::with_default_beta(paper_error_system());
    let beta = default_beta();
    let grid = GridSpec::default();
    assert_eq!((grid.n_theta, grid.n_gamma, grid.exclusion_radius), (61, 61, 1e-3));
    let checks = lyapunov_checks(&cert, &grid, 100, SEED).unwrap();
    let pass = checks.iter().all(|c| c.pass) && (cert.beta() - 1.2).abs() < 0.01;
    let detail = checks.iter().map(|c| format!("{} {} ({:.3e})", c.name, c.pass, c.worst_value)).collect::<Vec<_>>().join(", ");
    report(5, "Lyapunov certificate on the 61x61 grid", pass, &format!("beta = {:.6} (sup {:.6}); {detail}", cert.beta(), beta.sup));
    assert!(pass, "{checks:#?}");
}

#[test]
fn criterion_6_averaging_consistency() {
    let r = averaging_consistency(&paper_error_system(), 50, SEED);
    report(6, "period averages match the averaged vector fields", r.pass, &format!("worst relative error {:.3e}", r.worst_value));
    assert!(r.pass, "{r:?}");
}

#[test]
fn criterion_7_practical_stability_trend() {
    let spec = SweepSpec::new(vec![5.0, 10.0, 20.0, 40.0], vec![[1.0, 5.0 / 6.0], [1.0, 5.0 / 3.0]], 1e4);
    let r = practical_stability_sweep(&paper_error_system(), &spec).unwrap();
    let failures: Vec<_> = r.runs.iter().filter_map(|run| run.failure.clone()).collect();
    let pass = failures.is_empty() && r.monotone_radius;
    let radii = r.omegas.iter().zip(&r.radius).map(|(w, rad)| format!("omega {w}: {rad:.6e}")).collect::<Vec<_>>().join(", ");
    report(7, "tail radius nonincreasing in omega", pass, &radii);
    assert!(pass, "{failures:?} {:?}", r.radius);
}

#[test]
fn criterion_8_degenerate_contrast() {
    let lin = linearize_gesc(&paper_error_system()).unwrap();
    let pass = lin.model_rate == 0.0 && lin.averaged_rate < 0.0;
    report(
        8,
        "model-based rate vanishes, averaged rate is negative",
        pass,
        &format!("-k J''(theta*) = {:e}, -k G'(theta_bar*) = {:e}", lin.model_rate, lin.averaged_rate),
    );
    assert!(pass);
}
