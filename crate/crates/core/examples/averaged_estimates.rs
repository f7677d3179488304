//! Averaged gradient and Hessian estimates next to the true derivatives.
//!
//! `J(θ) = θ²(e^θ − 1)²` is strictly but not strongly convex: `J''(0) = 0`.
//! The period-averaged Hessian estimate `H̄` stays positive there, which is
//! what lets Newton ESC divide by it.
//!
//! ```text
//! cargo run --example averaged_estimates [amplitude]
//! ```

use esc_lab::averaging::AveragedMap;
use esc_lab::dither::DitherSpec;
use esc_lab::quadrature::{periodic_mean, PeriodicRule};
use esc_lab::scalar_maps::builtin_map;

fn main() -> esc_lab::Result<()> {
    let a: f64 = std::env::args().nth(1).map(|s| s.parse().expect("amplitude")).unwrap_or(0.5);
    let avg = AveragedMap::new(builtin_map("paper-example")?, a, PeriodicRule::default())?;

    println!("a = {a}");
    println!("{:>6} {:>12} {:>12} {:>12} {:>12} {:>12}", "theta", "J'", "G_avg", "J''", "H_avg", "H lower");
    for i in -6..=6 {
        let row = avg.table_row(0.25 * i as f64);
        println!(
            "{:>6.2} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e}",
            row.theta, row.j_prime, row.g_avg, row.j_second, row.h_avg, row.h_lower_bound
        );
    }

    // The demodulation signals recover the derivatives on average.
    let dither = DitherSpec::new(a, 10.0)?;
    let period = dither.period();
    let ms = periodic_mean(|t| dither.demod_gradient(t) * dither.perturbation(t), 0.0, period, 4096);
    let ns2 = periodic_mean(|t| dither.demod_hessian(t) * dither.perturbation(t).powi(2), 0.0, period, 4096);
    println!("<M S> = {ms:.15}, <N S^2> = {ns2:.15}");
    Ok(())
}
