//! Scalar cost maps with analytic first and second derivatives, a registry
//! of builtin maps, and grid-based checks of the convexity and minimizer
//! assumptions the averaged analysis relies on.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::simpson;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A cost map `J` together with `J'`, `J''` and, optionally, its minimizer.
#[derive(Clone)]
pub struct ScalarMap {
    name: String,
    formula: String,
    eval: RealFn,
    grad: RealFn,
    hess: RealFn,
    known_minimizer: Option<f64>,
}

impl fmt::Debug for ScalarMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarMap")
            .field("name", &self.name)
            .field("formula", &self.formula)
            .field("known_minimizer", &self.known_minimizer)
            .finish()
    }
}

impl ScalarMap {
    pub fn new<E, G, H>(name: impl Into<String>, formula: impl Into<String>, eval: E, grad: G, hess: H) -> Self
    where
        E: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ScalarMap {
            name: name.into(),
            formula: formula.into(),
            eval: Arc::new(eval),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
            known_minimizer: None,
        }
    }

    pub fn with_minimizer(mut self, theta_star: f64) -> Self {
        self.known_minimizer = Some(theta_star);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn formula(&self) -> &str {
        &self.formula
    }

    #[inline]
    pub fn eval(&self, theta: f64) -> f64 {
        (self.eval)(theta)
    }

    #[inline]
    pub fn grad(&self, theta: f64) -> f64 {
        (self.grad)(theta)
    }

    #[inline]
    pub fn hess(&self, theta: f64) -> f64 {
        (self.hess)(theta)
    }

    pub fn known_minimizer(&self) -> Option<f64> {
        self.known_minimizer
    }

    pub fn definition(&self) -> MapDefinition {
        MapDefinition {
            name: self.name.clone(),
            formula: self.formula.clone(),
            minimizer: self.known_minimizer,
        }
    }
}

/// Documentation record for a map, exported as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDefinition {
    pub name: String,
    pub formula: String,
    pub minimizer: Option<f64>,
}

fn paper_example() -> ScalarMap {
    // J = θ²(e^θ − 1)², written with u = e^θ − 1 for accuracy near 0.
    ScalarMap::new(
        "paper-example",
        "J(theta) = theta^2 * (exp(theta) - 1)^2",
        |t: f64| {
            let u = t.exp_m1();
            t * t * u * u
        },
        |t: f64| {
            let u = t.exp_m1();
            let e = t.exp();
            2.0 * t * u * u + 2.0 * t * t * u * e
        },
        |t: f64| {
            let u = t.exp_m1();
            let e = t.exp();
            2.0 * u * u + 8.0 * t * u * e + 2.0 * t * t * e * (e + u)
        },
    )
    .with_minimizer(0.0)
}

fn quadratic() -> ScalarMap {
    ScalarMap::new("quadratic", "J(theta) = theta^2", |t| t * t, |t| 2.0 * t, |_| 2.0).with_minimizer(0.0)
}

fn quartic() -> ScalarMap {
    ScalarMap::new(
        "quartic",
        "J(theta) = theta^4",
        |t: f64| t.powi(4),
        |t: f64| 4.0 * t.powi(3),
        |t: f64| 12.0 * t * t,
    )
    .with_minimizer(0.0)
}

fn abs_smooth() -> ScalarMap {
    // Pseudo-Huber: strictly convex, J'' -> 0 as |θ| -> ∞.
    ScalarMap::new(
        "abs-smooth",
        "J(theta) = sqrt(1 + theta^2) - 1",
        |t: f64| t.hypot(1.0) - 1.0,
        |t: f64| t / t.hypot(1.0),
        |t: f64| (1.0 + t * t).powf(-1.5),
    )
    .with_minimizer(0.0)
}

/// Names accepted by [`builtin_map`].
pub const BUILTIN_NAMES: [&str; 4] = ["paper-example", "quadratic", "quartic", "abs-smooth"];

/// Looks up a builtin map by name.
pub fn builtin_map(name: &str) -> Result<ScalarMap> {
    match name {
        "paper-example" => Ok(paper_example()),
        "quadratic" => Ok(quadratic()),
        "quartic" => Ok(quartic()),
        "abs-smooth" => Ok(abs_smooth()),
        _ => Err(Error::UnknownMap {
            name: name.to_string(),
            valid: BUILTIN_NAMES.iter().map(|s| s.to_string()).collect(),
        }),
    }
}

/// Name-indexed collection of maps, seeded with the builtins.
#[derive(Debug, Clone)]
pub struct MapRegistry {
    maps: BTreeMap<String, ScalarMap>,
}

impl Default for MapRegistry {
    fn default() -> Self {
        let maps = BUILTIN_NAMES
            .iter()
            .map(|n| (n.to_string(), builtin_map(n).expect("builtin")))
            .collect();
        MapRegistry { maps }
    }
}

impl MapRegistry {
    pub fn register(&mut self, map: ScalarMap) {
        self.maps.insert(map.name().to_string(), map);
    }

    pub fn get(&self, name: &str) -> Result<ScalarMap> {
        self.maps.get(name).cloned().ok_or_else(|| Error::UnknownMap {
            name: name.to_string(),
            valid: self.maps.keys().cloned().collect(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &ScalarMap> {
        self.maps.values()
    }

    pub fn definitions(&self) -> Vec<MapDefinition> {
        self.maps.values().map(ScalarMap::definition).collect()
    }
}

/// Point pair and weight at which a strict convexity inequality failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityWitness {
    pub theta1: f64,
    pub theta2: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    /// Strict chord inequality held at every sampled `(θ₁, θ₂, λ)`.
    pub strictly_convex_on_grid: bool,
    /// First violation of the chord inequality, if any.
    pub witness_violation: Option<ConvexityWitness>,
    /// Strict first-order (tangent line) inequality held at the same pairs.
    pub first_order_strict: bool,
    pub first_order_witness: Option<(f64, f64)>,
    /// Smallest `∫ J''` over the sampled intervals.
    pub min_hessian_integral: f64,
    pub grid_spec: String,
}

const LAMBDAS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Deterministic pairs: `θ₁` walks the strata of `[lo, hi]` upward at
/// quarter offsets, `θ₂` walks them downward at three-quarter offsets, so
/// the pairs are always distinct and cover both short and long chords.
fn stratified_pairs(lo: f64, hi: f64, n_pairs: usize) -> impl Iterator<Item = (f64, f64)> {
    let w = hi - lo;
    let n = n_pairs as f64;
    (0..n_pairs).map(move |i| {
        let t1 = lo + w * (i as f64 + 0.25) / n;
        let t2 = lo + w * ((n_pairs - 1 - i) as f64 + 0.75) / n;
        (t1, t2)
    })
}

/// Samples the strict convexity inequality and its first-order form on a
/// fixed grid over `[lo, hi]`.
pub fn check_strict_convexity(map: &ScalarMap, lo: f64, hi: f64, n_pairs: usize) -> Result<ConvexityReport> {
    if !(lo < hi) {
        return Err(invalid(format!("degenerate interval [{lo}, {hi}]")));
    }
    if n_pairs == 0 {
        return Err(invalid("n_pairs must be at least 1"));
    }
    let mut witness = None;
    let mut first_order_witness = None;
    let mut min_integral = f64::INFINITY;
    for (t1, t2) in stratified_pairs(lo, hi, n_pairs) {
        let (j1, j2) = (map.eval(t1), map.eval(t2));
        for &lambda in &LAMBDAS {
            let mid = map.eval(lambda * t1 + (1.0 - lambda) * t2);
            let chord = lambda * j1 + (1.0 - lambda) * j2;
            if witness.is_none() && !(mid < chord) {
                witness = Some(ConvexityWitness { theta1: t1, theta2: t2, lambda });
            }
        }
        let tangent_ok = j2 > j1 + map.grad(t1) * (t2 - t1) && j1 > j2 + map.grad(t2) * (t1 - t2);
        if first_order_witness.is_none() && !tangent_ok {
            first_order_witness = Some((t1, t2));
        }
        let (a, b) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        min_integral = min_integral.min(map.grad(b) - map.grad(a));
    }
    Ok(ConvexityReport {
        strictly_convex_on_grid: witness.is_none(),
        witness_violation: witness,
        first_order_strict: first_order_witness.is_none(),
        first_order_witness,
        min_hessian_integral: min_integral,
        grid_spec: format!(
            "{n_pairs} stratified pairs on [{lo}, {hi}] (offsets 1/4 ascending, 3/4 descending), lambda in {LAMBDAS:?}"
        ),
    })
}

/// `∫_{θ₁}^{θ₂} J''(φ) dφ`, evaluated exactly as `J'(θ₂) − J'(θ₁)`.
pub fn hessian_integral(map: &ScalarMap, theta1: f64, theta2: f64) -> Result<f64> {
    if !(theta1 < theta2) {
        return Err(invalid(format!("hessian_integral needs theta1 < theta2, got {theta1} >= {theta2}")));
    }
    Ok(map.grad(theta2) - map.grad(theta1))
}

/// Same integral by composite Simpson on `J''`, for cross-checking.
pub fn hessian_integral_quadrature(map: &ScalarMap, theta1: f64, theta2: f64, panels: usize) -> Result<f64> {
    if !(theta1 < theta2) {
        return Err(invalid(format!("hessian_integral needs theta1 < theta2, got {theta1} >= {theta2}")));
    }
    Ok(simpson(|p| map.hess(p), theta1, theta2, panels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizerReport {
    pub minimizer: f64,
    /// `J(θ*) < J(θ)` at every sampled `θ ≠ θ*`.
    pub strict_minimum: bool,
    /// `|J'(θ*)|`.
    pub gradient_at_minimizer: f64,
    /// `J'(θ) ≠ 0` at every sampled `θ ≠ θ*`. Implied by strict convexity
    /// together with `J'(θ*) = 0`; checked anyway.
    pub gradient_nonzero_elsewhere: bool,
}

/// Grid check of the global-minimizer assumption.
pub fn check_global_minimizer(map: &ScalarMap, lo: f64, hi: f64, n_points: usize) -> Result<MinimizerReport> {
    let theta_star = map
        .known_minimizer()
        .ok_or_else(|| invalid(format!("map `{}` has no known minimizer", map.name())))?;
    if !(lo < hi) || n_points < 2 {
        return Err(invalid("minimizer check needs lo < hi and at least two points"));
    }
    let j_star = map.eval(theta_star);
    let mut strict = true;
    let mut nonzero = true;
    for i in 0..n_points {
        let t = lo + (hi - lo) * i as f64 / (n_points - 1) as f64;
        if t == theta_star {
            continue;
        }
        strict &= j_star < map.eval(t);
        nonzero &= map.grad(t) != 0.0;
    }
    Ok(MinimizerReport {
        minimizer: theta_star,
        strict_minimum: strict,
        gradient_at_minimizer: map.grad(theta_star).abs(),
        gradient_nonzero_elsewhere: nonzero,
    })
}

/// Observed central-difference convergence orders for `J'` and `J''`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    /// Smallest observed order over points where the error is above the
    /// roundoff floor; `None` when the difference quotient is exact there.
    pub grad_order: Option<f64>,
    pub hess_order: Option<f64>,
    pub max_grad_error: f64,
    pub max_hess_error: f64,
}

fn observed_order<F, D>(f: F, df: D, points: &[f64], coarse: f64, fine: f64) -> (Option<f64>, f64)
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut worst: Option<f64> = None;
    let mut max_err: f64 = 0.0;
    for &t in points {
        let err = |d: f64| ((f(t + d) - f(t - d)) / (2.0 * d) - df(t)).abs();
        let (ec, ef) = (err(coarse), err(fine));
        max_err = max_err.max(ec);
        // Below this the difference quotient is exact up to roundoff.
        let floor = 1e-9 * (1.0 + df(t).abs() + f(t).abs());
        if ec > floor {
            let order = (ec / ef).ln() / (coarse / fine).ln();
            worst = Some(worst.map_or(order, |w: f64| w.min(order)));
        }
    }
    (worst, max_err)
}

/// Compares analytic derivatives against central differences at step sizes
/// `1e-3` and `1e-4`.
pub fn derivative_check(map: &ScalarMap, points: &[f64]) -> DerivativeReport {
    let (grad_order, max_grad_error) = observed_order(|t| map.eval(t), |t| map.grad(t), points, 1e-3, 1e-4);
    let (hess_order, max_hess_error) = observed_order(|t| map.grad(t), |t| map.hess(t), points, 1e-3, 1e-4);
    DerivativeReport { grad_order, hess_order, max_grad_error, max_hess_error }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn builtin_values() {
        let p = builtin_map("paper-example").unwrap();
        assert_eq!(p.eval(0.0), 0.0);
        assert_eq!(p.hess(0.0), 0.0);
        assert_eq!(p.grad(0.0), 0.0);
        assert_eq!(builtin_map("quadratic").unwrap().hess(3.7), 2.0);
        assert_eq!(builtin_map("quartic").unwrap().grad(1.0), 4.0);
    }

    #[test]
    fn unknown_name_lists_registry() {
        let err = builtin_map("cubic").unwrap_err().to_string();
        for n in BUILTIN_NAMES {
            assert!(err.contains(n), "{err}");
        }
    }

    #[test]
    fn registry_accepts_new_maps() {
        let mut reg = MapRegistry::default();
        reg.register(ScalarMap::new("shifted", "(theta-1)^2", |t| (t - 1.0).powi(2), |t| 2.0 * (t - 1.0), |_| 2.0).with_minimizer(1.0));
        assert_eq!(reg.get("shifted").unwrap().known_minimizer(), Some(1.0));
        assert!(reg.get("nope").unwrap_err().to_string().contains("shifted"));
        assert_eq!(reg.definitions().len(), 5);
    }

    #[test]
    fn convexity_of_builtins() {
        let q = builtin_map("quadratic").unwrap();
        assert!(check_strict_convexity(&q, -2.0, 2.0, 50).unwrap().strictly_convex_on_grid);
        let p = builtin_map("paper-example").unwrap();
        let rep = check_strict_convexity(&p, -3.0, 3.0, 50).unwrap();
        assert!(rep.strictly_convex_on_grid && rep.witness_violation.is_none());
        assert!(rep.first_order_strict);
        assert!(rep.min_hessian_integral > 0.0);
    }

    #[test]
    fn affine_map_has_witness() {
        let lin = ScalarMap::new("linear", "theta", |t| t, |_| 1.0, |_| 0.0);
        let rep = check_strict_convexity(&lin, -1.0, 1.0, 10).unwrap();
        assert!(!rep.strictly_convex_on_grid);
        let w = rep.witness_violation.unwrap();
        // equality, not a reversed inequality
        let mid = lin.eval(w.lambda * w.theta1 + (1.0 - w.lambda) * w.theta2);
        let chord = w.lambda * lin.eval(w.theta1) + (1.0 - w.lambda) * lin.eval(w.theta2);
        assert_eq!(mid, chord);
        assert!(!rep.first_order_strict);
        assert_eq!(rep.min_hessian_integral, 0.0);
    }

    #[test]
    fn degenerate_interval_rejected() {
        let q = builtin_map("quadratic").unwrap();
        assert!(check_strict_convexity(&q, 1.0, 1.0, 5).is_err());
        assert!(check_strict_convexity(&q, 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn hessian_integrals() {
        let q = builtin_map("quadratic").unwrap();
        assert_eq!(hessian_integral(&q, 0.0, 1.0).unwrap(), 2.0);
        assert_eq!(hessian_integral(&builtin_map("quartic").unwrap(), -1.0, 1.0).unwrap(), 8.0);
        assert!(hessian_integral(&q, 1.0, 0.0).is_err());

        // Independent closed form of J'(θ) = 2θ(e^θ−1)² + 2θ²(e^θ−1)e^θ.
        let jp = |t: f64| 2.0 * t * (t.exp() - 1.0).powi(2) + 2.0 * t * t * (t.exp() - 1.0) * t.exp();
        let p = builtin_map("paper-example").unwrap();
        let v = hessian_integral(&p, -0.1, 0.1).unwrap();
        assert!(v > 0.0);
        assert!((v - (jp(0.1) - jp(-0.1))).abs() < 1e-15);
        let by_quad = hessian_integral_quadrature(&p, -0.1, 0.1, 512).unwrap();
        assert!((v - by_quad).abs() < 1e-12);
    }

    #[test]
    fn hessian_integral_positive_on_grid() {
        let pts = grid(-3.0, 3.0, 25);
        for name in BUILTIN_NAMES {
            let m = builtin_map(name).unwrap();
            for (i, &a) in pts.iter().enumerate() {
                for &b in &pts[i + 1..] {
                    assert!(hessian_integral(&m, a, b).unwrap() > 0.0, "{name} [{a},{b}]");
                }
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let pts = grid(-3.0, 3.0, 13);
        for name in BUILTIN_NAMES {
            let rep = derivative_check(&builtin_map(name).unwrap(), &pts);
            for order in [rep.grad_order, rep.hess_order].into_iter().flatten() {
                assert!(order >= 1.9, "{name}: {rep:?}");
            }
        }
    }

    #[test]
    fn minimizer_assumption() {
        for name in BUILTIN_NAMES {
            let rep = check_global_minimizer(&builtin_map(name).unwrap(), -3.0, 3.0, 61).unwrap();
            assert!(rep.strict_minimum && rep.gradient_nonzero_elsewhere, "{name}");
            assert!(rep.gradient_at_minimizer < 1e-14);
        }
    }

    #[test]
    fn convexity_checks_agree_on_builtins() {
        for name in BUILTIN_NAMES {
            let rep = check_strict_convexity(&builtin_map(name).unwrap(), -3.0, 3.0, 50).unwrap();
            assert_eq!(rep.strictly_convex_on_grid, rep.first_order_strict, "{name}");
        }
    }
}
