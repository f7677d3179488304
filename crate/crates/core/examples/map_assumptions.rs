//! Grid checks of the cost-map assumptions, for the built-in maps and for a
//! user-supplied one.
//!
//! ```text
//! cargo run --example map_assumptions
//! ```

use esc_lab::scalar_maps::{check_global_minimizer, check_strict_convexity, MapRegistry, ScalarMap};

fn main() -> esc_lab::Result<()> {
    let mut registry = MapRegistry::default();
    // A sixth-order bowl, flat to fourth order at its minimizer θ* = 1.
    registry.register(
        ScalarMap::new(
            "sextic",
            "J(theta) = (theta - 1)^6",
            |t| (t - 1.0).powi(6),
            |t| 6.0 * (t - 1.0).powi(5),
            |t| 30.0 * (t - 1.0).powi(4),
        )
        .with_minimizer(1.0),
    );

    for map in registry.iter() {
        let conv = check_strict_convexity(map, -3.0, 3.0, 50)?;
        let min = check_global_minimizer(map, -3.0, 3.0, 601)?;
        println!("{}: {}", map.name(), map.formula());
        println!(
            "  strictly convex on grid: {} (first-order check {}), min Hessian integral {:.3e}",
            conv.strictly_convex_on_grid, conv.first_order_strict, conv.min_hessian_integral
        );
        println!(
            "  minimizer {:.6} (known {:?}), strict {}, J' vanishes only there: {}",
            min.minimizer,
            map.known_minimizer(),
            min.strict_minimum,
            min.gradient_nonzero_elsewhere
        );
        println!("  J''(minimizer) = {:e}", map.hess(min.minimizer));
    }
    Ok(())
}
