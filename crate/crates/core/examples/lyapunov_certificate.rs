//! Numerical Lyapunov certificate for the averaged Newton ESC in error
//! coordinates `(θ̃, γ̃ = ln ΓH̄)`.
//!
//! ```text
//! cargo run --release --example lyapunov_certificate
//! ```

use esc_lab::dynamics::{ErrorStateLog, EscParams, NescSystem};
use esc_lab::quadrature::PeriodicRule;
use esc_lab::scalar_maps::builtin_map;
use esc_lab::stability::{default_beta, lyapunov_grid, GridSpec, LyapunovCertificate};

fn main() -> esc_lab::Result<()> {
    let beta = default_beta();
    println!("sup |r| = {:.12} at gamma = {:.9}; beta = {:.12}", beta.sup, beta.argmax, beta.beta);

    let params = EscParams::new(0.5, 10.0, 0.001, 0.001)?;
    let sys = NescSystem::new(builtin_map("paper-example")?, params, PeriodicRule::default())?.with_equilibrium(1e-14)?;
    let cert = LyapunovCertificate::new(sys, beta.beta)?;

    let report = lyapunov_grid(&cert, &GridSpec::default())?;
    println!(
        "{} grid points: min V = {:.3e} at {:?}, max V_dot = {:.3e} at {:?}, min beta factor {:.3e}, violations {}",
        report.points_checked,
        report.min_v,
        report.min_v_at,
        report.max_v_dot,
        report.max_v_dot_at,
        report.min_beta_factor,
        report.violations.len()
    );

    println!("{:>6} {:>6} {:>14} {:>14} {:>14}", "theta", "gamma", "V", "V_dot", "finite diff");
    for (t, g) in [(1.0, 0.0), (-2.0, 1.5), (0.1, -2.5), (3.0, 3.0), (-0.5, -0.5)] {
        let e = ErrorStateLog { theta_err: t, gamma_err: g };
        println!(
            "{t:>6} {g:>6} {:>14.6e} {:>14.6e} {:>14.6e}",
            cert.value(e),
            cert.dot(e),
            cert.dot_finite_difference(e, 1e-5)
        );
    }
    Ok(())
}
