//! The property suite behind `esc-lab verify`.
//!
//! Each property reduces to one scalar margin that must be positive (or an
//! error that must stay under a tolerance); the report keeps the point where
//! the margin was worst so a failure comes with its witness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::AveragedMap;
use crate::config::{LineGrid, VerifyOptions};
use crate::dither::DitherSpec;
use crate::dynamics::{ErrorStateLog, ErrorSystem, EscParams, NescSystem};
use crate::error::Result;
use crate::quadrature::{periodic_mean, PeriodicRule};
use crate::scalar_maps::{check_global_minimizer, check_strict_convexity, derivative_check, MapRegistry, ScalarMap};
use crate::stability::{linearize, linearize_gesc, lyapunov_grid, GridSpec, LyapunovCertificate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub pass: bool,
    pub worst_point: Vec<f64>,
    pub worst_value: f64,
}

impl PropertyResult {
    /// Passes when every margin is strictly positive; keeps the smallest.
    fn positive(name: impl Into<String>, margins: impl IntoIterator<Item = (Vec<f64>, f64)>) -> Self {
        let mut worst = (Vec::new(), f64::INFINITY);
        for (point, m) in margins {
            if m < worst.1 || m.is_nan() {
                worst = (point, m);
                if m.is_nan() {
                    break;
                }
            }
        }
        PropertyResult { name: name.into(), pass: worst.1 > 0.0, worst_point: worst.0, worst_value: worst.1 }
    }

    /// Passes when every error is below `tol`; keeps the largest.
    fn below(name: impl Into<String>, tol: f64, errors: impl IntoIterator<Item = (Vec<f64>, f64)>) -> Self {
        let mut worst = (Vec::new(), 0.0);
        for (point, e) in errors {
            if e > worst.1 || e.is_nan() {
                worst = (point, e);
                if e.is_nan() {
                    break;
                }
            }
        }
        PropertyResult { name: name.into(), pass: worst.1 < tol, worst_point: worst.0, worst_value: worst.1 }
    }

    fn failed(name: impl Into<String>, point: Vec<f64>) -> Self {
        PropertyResult { name: name.into(), pass: false, worst_point: point, worst_value: f64::NAN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub all_pass: bool,
    pub properties: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn new(properties: Vec<PropertyResult>) -> Self {
        VerifyReport { all_pass: properties.iter().all(|p| p.pass), properties }
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyResult> {
        self.properties.iter().filter(|p| !p.pass)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }
}

fn tag(kind: &str, map: &str, a: f64) -> String {
    format!("{kind}[{map},a={a}]")
}

/// Monotone `Ḡ`, positive `Ḡ'`, positive `H̄`, the `J'` sandwich on `Ḡ`,
/// and `H̄ > lower bound > 0`, for one map and amplitude over `grid`.
pub fn proposition_checks(map: &ScalarMap, a: f64, grid: &LineGrid, rule: &PeriodicRule) -> Result<Vec<PropertyResult>> {
    let avg = AveragedMap::new(map.clone(), a, rule.clone())?;
    let pts = grid.points();
    let g: Vec<f64> = pts.iter().map(|&t| avg.gradient(t)).collect();
    let name = map.name();
    let mut out = vec![
        PropertyResult::positive(
            tag("gradient_increasing", name, a),
            pts.windows(2).zip(g.windows(2)).map(|(t, g)| (vec![t[0], t[1]], g[1] - g[0])),
        ),
        PropertyResult::positive(tag("gradient_deriv_positive", name, a), pts.iter().map(|&t| (vec![t], avg.gradient_deriv(t)))),
        PropertyResult::positive(tag("hessian_positive", name, a), pts.iter().map(|&t| (vec![t], avg.hessian(t)))),
        PropertyResult::positive(
            tag("gradient_sandwich", name, a),
            pts.iter().zip(&g).map(|(&t, &gt)| {
                let (lo, hi) = avg.gradient_bounds(t);
                (vec![t], (gt - lo).min(hi - gt))
            }),
        ),
        PropertyResult::positive(
            tag("hessian_lower_bound", name, a),
            pts.iter().map(|&t| {
                let lb = avg.hessian_lower_bound(t);
                (vec![t], (avg.hessian(t) - lb).min(lb))
            }),
        ),
    ];
    out.push(match avg.find_equilibrium(1e-14) {
        Ok(eq) => {
            let theta_star = map.known_minimizer().unwrap_or(0.0);
            let inside = eq.theta_bar_star > theta_star - a.abs() && eq.theta_bar_star < theta_star + a.abs();
            let mut r = PropertyResult::below(tag("equilibrium", name, a), 1e-10, [(vec![eq.theta_bar_star], eq.residual)]);
            r.pass &= inside;
            r
        }
        Err(_) => PropertyResult::failed(tag("equilibrium", name, a), vec![]),
    });
    Ok(out)
}

/// `Ḡ = 2θ̄` and `H̄ = 2` on `J = θ²`.
pub fn quadratic_exactness(amplitudes: &[f64], rule: &PeriodicRule) -> Result<PropertyResult> {
    let map = crate::scalar_maps::builtin_map("quadratic")?;
    let mut errors = Vec::new();
    for &a in amplitudes {
        let avg = AveragedMap::new(map.clone(), a, rule.clone())?;
        for i in 0..=40 {
            let t = -2.0 + 0.1 * i as f64;
            let e = (avg.gradient(t) - 2.0 * t).abs().max((avg.hessian(t) - 2.0).abs());
            errors.push((vec![t, a], e));
        }
    }
    Ok(PropertyResult::below("quadratic_exactness", 1e-12, errors))
}

/// Strict convexity, the first-order check agreeing with it, the global
/// minimizer, and derivative orders, for one map on `[−3, 3]`.
pub fn map_checks(map: &ScalarMap) -> Result<Vec<PropertyResult>> {
    let name = map.name();
    let conv = check_strict_convexity(map, -3.0, 3.0, 50)?;
    let witness = conv.witness_violation.map(|w| vec![w.theta1, w.theta2, w.lambda]).unwrap_or_default();
    let mut convex = PropertyResult::positive(format!("strict_convexity[{name}]"), [(witness, conv.min_hessian_integral)]);
    convex.pass &= conv.strictly_convex_on_grid && conv.first_order_strict;
    let agree = PropertyResult {
        name: format!("convexity_checks_agree[{name}]"),
        pass: conv.strictly_convex_on_grid == conv.first_order_strict,
        worst_point: conv.first_order_witness.map(|(a, b)| vec![a, b]).unwrap_or_default(),
        worst_value: if conv.strictly_convex_on_grid == conv.first_order_strict { 0.0 } else { 1.0 },
    };
    let minimizer = match check_global_minimizer(map, -3.0, 3.0, 601) {
        Ok(m) => {
            let mut r = PropertyResult::below(format!("global_minimizer[{name}]"), 1e-12, [(vec![m.minimizer], m.gradient_at_minimizer)]);
            r.pass &= m.strict_minimum && m.gradient_nonzero_elsewhere;
            r
        }
        Err(_) => PropertyResult::failed(format!("global_minimizer[{name}]"), vec![]),
    };
    let pts: Vec<f64> = (0..=24).map(|i| -3.0 + 0.25 * i as f64 + 0.01).collect();
    let d = derivative_check(map, &pts);
    let order = d.grad_order.unwrap_or(2.0).min(d.hess_order.unwrap_or(2.0));
    let derivs = PropertyResult::positive(format!("derivative_order[{name}]"), [(vec![], order - 1.9)]);
    Ok(vec![convex, agree, minimizer, derivs])
}

/// `⟨M⟩ = 0`, `⟨N⟩ = 0`, `⟨MS⟩ = 1`, `⟨NS²⟩ = 2`.
pub fn demodulation_identities(dither: &DitherSpec) -> PropertyResult {
    let mean = |f: &dyn Fn(f64) -> f64| periodic_mean(f, 0.0, dither.period(), 4096);
    let errs = [
        mean(&|t| dither.demod_gradient(t)).abs(),
        mean(&|t| dither.demod_hessian(t)).abs(),
        (mean(&|t| dither.demod_gradient(t) * dither.perturbation(t)) - 1.0).abs(),
        (mean(&|t| dither.demod_hessian(t) * dither.perturbation(t).powi(2)) - 2.0).abs(),
    ];
    PropertyResult::below("demodulation_identities", 1e-10, errs.iter().enumerate().map(|(i, &e)| (vec![i as f64], e)))
}

/// Relative error of a period average against the averaged vector field.
fn avg_error(mean: f64, avg: f64) -> f64 {
    (mean - avg).abs() / (1.0 + avg.abs())
}

/// Period averages of the full NESC, GESC and log-error right-hand sides
/// at `n` random frozen states, against their averaged counterparts.
pub fn averaging_consistency(sys: &ErrorSystem, n: usize, seed: u64) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(0.1..3.0), rng.gen_range(-2.0..2.0)]).collect();
    let nesc = sys.system();
    let period = nesc.params().dither.period();
    let mean = |f: &dyn Fn(f64) -> f64| periodic_mean(f, 0.0, period, 4096);
    let errors: Vec<(Vec<f64>, f64)> = states
        .par_iter()
        .map(|&[theta, gamma, gamma_err]| {
            let x = [theta, gamma];
            let avg = nesc.avg_rhs(x).expect("gamma > 0");
            let mut worst = 0.0f64;
            for i in 0..2 {
                worst = worst.max(avg_error(mean(&|t| nesc.full_rhs(t, x).expect("gamma > 0")[i]), avg[i]));
            }
            worst = worst.max(avg_error(mean(&|t| nesc.gesc_full_rhs(t, theta)), nesc.gesc_avg_rhs(theta)));
            let e = ErrorStateLog { theta_err: theta, gamma_err };
            let avg_e = sys.log_error_avg_rhs(e);
            for i in 0..2 {
                worst = worst.max(avg_error(mean(&|t| sys.log_error_rhs(t, e)[i]), avg_e[i]));
            }
            (vec![theta, gamma, gamma_err], worst)
        })
        .collect();
    PropertyResult::below("averaging_consistency", 1e-8, errors)
}

/// `‖nesc_avg_rhs(θ̄*, 1/H̄(θ̄*))‖`.
pub fn equilibrium_residual(sys: &ErrorSystem) -> PropertyResult {
    let x = [sys.theta_bar_star(), sys.gamma_star()];
    let r = sys.system().avg_rhs(x).map(|f| f[0].hypot(f[1])).unwrap_or(f64::NAN);
    PropertyResult::below("equilibrium_rhs", 1e-10, [(x.to_vec(), r)])
}

/// Lyapunov checks on `grid`: `V > 0`, `V̇ < 0`, `β` sufficiency, and
/// `V̇` against a finite difference at `fd_points` random grid points.
pub fn lyapunov_checks(cert: &LyapunovCertificate, grid: &GridSpec, fd_points: usize, seed: u64) -> Result<Vec<PropertyResult>> {
    let report = lyapunov_grid(cert, grid)?;
    let pt = |s: &crate::stability::LyapunovSample| vec![s.theta_err, s.gamma_err];
    let v = PropertyResult::positive("lyapunov_positive", report.samples.iter().map(|s| (pt(s), s.v)));
    let v_dot = PropertyResult::positive("lyapunov_decreasing", report.samples.iter().map(|s| (pt(s), -s.v_dot)));
    let mut beta = PropertyResult::positive("beta_sufficiency", report.samples.iter().map(|s| (pt(s), s.beta_factor)));
    // The factor may touch zero only where β equals the supremum exactly.
    beta.pass = beta.worst_value >= 0.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let thetas = grid.theta_axis();
    let gammas = grid.gamma_axis();
    let mut picks = Vec::with_capacity(fd_points);
    while picks.len() < fd_points {
        let (t, g) = (thetas[rng.gen_range(0..thetas.len())], gammas[rng.gen_range(0..gammas.len())]);
        if !grid.excludes(t, g) {
            picks.push(ErrorStateLog { theta_err: t, gamma_err: g });
        }
    }
    let fd: Vec<(Vec<f64>, f64)> = picks
        .par_iter()
        .map(|&e| {
            let exact = cert.dot(e);
            let approx = cert.dot_finite_difference(e, 1e-5);
            (vec![e.theta_err, e.gamma_err], ((exact - approx) / exact).abs())
        })
        .collect();
    let fd = PropertyResult::below("lyapunov_dot_finite_difference", 1e-6, fd);
    Ok(vec![v, v_dot, beta, fd])
}

/// Both eigenvalues negative for every registered map, and the analytic
/// diagonal against finite differences.
pub fn linearization_checks(registry: &MapRegistry, params: EscParams, rule: &PeriodicRule, tol: f64) -> Vec<PropertyResult> {
    let mut out = Vec::new();
    for map in registry.iter() {
        let name = format!("linearization[{}]", map.name());
        let sys = NescSystem::new(map.clone(), params, rule.clone()).and_then(|s| s.with_equilibrium(tol));
        match sys.and_then(|s| linearize(&s)) {
            Ok(lin) => {
                let mut r = PropertyResult::positive(name, [(vec![lin.eig_theta, lin.eig_gamma], -lin.eig_theta.max(lin.eig_gamma))]);
                let diag_err = (0..2)
                    .map(|i| (lin.jacobian[i][i] - lin.jacobian_fd[i][i]).abs() / lin.jacobian[i][i].abs())
                    .fold(0.0, f64::max);
                r.pass &= diag_err < 1e-6;
                out.push(r);
            }
            Err(_) => out.push(PropertyResult::failed(name, vec![])),
        }
    }
    out
}

/// `−kJ''(θ*) = 0` while `−kḠ'(θ̄*) < 0`.
pub fn gesc_contrast(sys: &ErrorSystem) -> Result<PropertyResult> {
    let lin = linearize_gesc(sys)?;
    let mut r = PropertyResult::positive("gesc_contrast", [(vec![lin.theta_star, lin.theta_bar_star], -lin.averaged_rate)]);
    r.pass &= lin.model_rate == 0.0;
    Ok(r)
}

/// Everything: the proposition suite over `opts.maps × opts.amplitudes`,
/// map assumption checks for every registered map, quadratic exactness,
/// dither identities, and the Lyapunov, linearization and averaging checks
/// on `paper-example` with the dither amplitude 0.5 and the gains of
/// `params`.
pub fn run_suite(
    registry: &MapRegistry,
    params: EscParams,
    rule: &PeriodicRule,
    opts: &VerifyOptions,
    grid: &GridSpec,
) -> Result<VerifyReport> {
    let mut props = Vec::new();
    for name in &opts.maps {
        let map = registry.get(name)?;
        for &a in &opts.amplitudes {
            props.extend(proposition_checks(&map, a, &opts.grid, rule)?);
        }
    }
    for map in registry.iter() {
        props.extend(map_checks(map)?);
    }
    props.push(quadratic_exactness(&[0.1, 0.5, 2.0], rule)?);
    props.push(demodulation_identities(&params.dither));

    let params = EscParams { dither: DitherSpec { amplitude: 0.5, ..params.dither }, ..params };
    let sys = NescSystem::new(registry.get("paper-example")?, params, rule.clone())?.with_equilibrium(1e-14)?;
    props.push(equilibrium_residual(&sys));
    props.push(gesc_contrast(&sys)?);
    props.push(averaging_consistency(&sys, opts.consistency_states, opts.seed));
    props.extend(linearization_checks(registry, params, rule, 1e-14));
    let cert = LyapunovCertificate::with_default_beta(sys);
    props.extend(lyapunov_checks(&cert, grid, opts.fd_points, opts.seed)?);
    Ok(VerifyReport::new(props))
}
