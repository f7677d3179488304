//! Local convergence rates: gradient ESC versus Newton ESC.
//!
//! The model gradient flow `θ̇ = −kJ'(θ)` has rate `−kJ''(θ*)`, which is zero
//! at a flat minimum; the averaged gradient ESC has `−kḠ'(θ̄*) < 0`. Newton
//! ESC rescales by `H̄`, so on a quadratic map its rates are exactly `−k`
//! and `−ω_l` whatever the curvature.
//!
//! ```text
//! cargo run --example rate_assignment
//! ```

use esc_lab::dynamics::{EscParams, NescSystem};
use esc_lab::quadrature::PeriodicRule;
use esc_lab::scalar_maps::{builtin_map, ScalarMap};
use esc_lab::stability::{linearize, linearize_gesc, linearize_map};

fn main() -> esc_lab::Result<()> {
    let params = EscParams::new(0.5, 10.0, 0.001, 0.001)?;
    let sys = NescSystem::new(builtin_map("paper-example")?, params, PeriodicRule::default())?.with_equilibrium(1e-14)?;
    let gesc = linearize_gesc(&sys)?;
    let nesc = linearize(&sys)?;
    println!("paper-example, k = {}:", params.k);
    println!("  model gradient flow rate    {:e}", gesc.model_rate);
    println!("  averaged gradient ESC rate  {:e}", gesc.averaged_rate);
    println!("  averaged Newton ESC rates   {:e}, {:e}", nesc.eig_theta, nesc.eig_gamma);
    println!("  Jacobian {:?}", nesc.jacobian);

    for curvature in [0.1, 1.0, 50.0] {
        let map = ScalarMap::new(
            format!("{curvature} theta^2"),
            "",
            move |t| curvature * t * t,
            move |t| 2.0 * curvature * t,
            move |_| 2.0 * curvature,
        )
        .with_minimizer(0.0);
        let lin = linearize_map(map, EscParams::new(0.5, 10.0, 1.0, 0.01)?, PeriodicRule::default(), 1e-14)?;
        println!("J = {curvature} theta^2: Newton rates {:.15}, {:.15}", lin.eig_theta, lin.eig_gamma);
    }
    Ok(())
}
