//! The fixed-step RK4 integrator on its own: observed order of accuracy and
//! the positivity guard.
//!
//! ```text
//! cargo run --example integrator_order
//! ```

use esc_lab::integrator::{step_convergence_order, IntegrationSpec, Integrator};

fn main() -> esc_lab::Result<()> {
    // Logistic growth has a closed form to compare against.
    let logistic = |_t: f64, x: &[f64; 1]| Ok([x[0] * (1.0 - x[0])]);
    let exact = |t: f64| 0.1 * t.exp() / (1.0 - 0.1 + 0.1 * t.exp());
    for dt in [0.5, 0.25, 0.125, 0.0625] {
        let x = Integrator::new(IntegrationSpec { dt, t_final: 10.0, record_every: 1 })?.final_state(logistic, [0.1])?;
        println!("dt = {dt:<7} error {:.3e}", (x[0] - exact(10.0)).abs());
    }
    let integrator = Integrator::new(IntegrationSpec { dt: 0.1, t_final: 10.0, record_every: 1 })?;
    println!("observed order {:.3}", step_convergence_order(&integrator, logistic, [0.1])?);

    // A stiff Riccati-type equation with a step far beyond its stability
    // limit overshoots through zero; the guard stops the run there.
    let fast = |_t: f64, x: &[f64; 1]| Ok([100.0 * x[0] * (1.0 - 2.0 * x[0])]);
    let traj = Integrator::new(IntegrationSpec { dt: 0.1, t_final: 1.0, record_every: 1 })?
        .with_guard(Some(0))
        .run(fast, [1.0])?;
    println!("guarded run: {:?}", traj.domain_exit);
    Ok(())
}
