//! The averaged equilibrium `θ̄*` and its amplitude-dependent offset from
//! the true minimizer.
//!
//! ```text
//! cargo run --example equilibrium
//! ```

use esc_lab::averaging::AveragedMap;
use esc_lab::quadrature::PeriodicRule;
use esc_lab::scalar_maps::builtin_map;

fn main() -> esc_lab::Result<()> {
    for name in ["paper-example", "quartic", "abs-smooth"] {
        let map = builtin_map(name)?;
        println!("{name}: {}", map.formula());
        for a in [0.05, 0.1, 0.25, 0.5, 1.0, 2.0] {
            let avg = AveragedMap::new(map.clone(), a, PeriodicRule::default())?;
            let eq = avg.find_equilibrium(1e-14)?;
            println!(
                "  a = {a:<5} theta_bar* = {:>+.15e} in ({:+.2}, {:+.2}), Gamma_bar* = {:.6}, |G(theta_bar*)| = {:.1e}",
                eq.theta_bar_star, eq.bracket.0, eq.bracket.1, eq.gamma_star, eq.residual
            );
        }
    }
    Ok(())
}
