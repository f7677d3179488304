//! Dither-frequency sweep of the full Newton ESC: the tail radius around
//! `(θ̄*, Γ̄*)`, the first entry time into a target ball and a fitted
//! exponential envelope.
//!
//! ```text
//! cargo run --release --example practical_stability [horizon]
//! ```

use esc_lab::dynamics::{EscParams, NescSystem};
use esc_lab::quadrature::PeriodicRule;
use esc_lab::scalar_maps::builtin_map;
use esc_lab::stability::{practical_stability_sweep, SweepSpec};

fn main() -> esc_lab::Result<()> {
    let horizon: f64 = std::env::args().nth(1).map(|s| s.parse().expect("horizon")).unwrap_or(3000.0);
    let params = EscParams::new(0.5, 10.0, 0.01, 0.01)?;
    let sys = NescSystem::new(builtin_map("paper-example")?, params, PeriodicRule::default())?.with_equilibrium(1e-14)?;
    let spec = SweepSpec::new(vec![5.0, 10.0, 20.0, 40.0], vec![[1.0, 5.0 / 6.0], [-1.0, 3.0]], horizon);
    let report = practical_stability_sweep(&sys, &spec)?;

    println!("tail window {:?}, target radius {}", report.tail_window, report.target_radius);
    for (i, w) in report.omegas.iter().enumerate() {
        println!("omega = {w:>4}: radius {:.6e}, entry time {:?}", report.radius[i], report.entry_time[i]);
    }
    for run in &report.runs {
        if let (Some(m), Some(l)) = (run.fit_m, run.fit_lambda) {
            println!("  omega {:>4} ic{}: |e(t)| ~ {m:.3} e^(-{l:.3e} t) |e(0)|", run.omega, run.ic_index);
        }
        if let Some(f) = &run.failure {
            println!("  omega {:>4} ic{}: {f}", run.omega, run.ic_index);
        }
    }
    println!("radius nonincreasing in omega: {}", report.monotone_radius);
    Ok(())
}
