//! Averaged gradient and Hessian estimates `Ḡ`, `H̄` and their
//! `θ̄`-derivatives, the bounds that sandwich them, and the unique zero
//! `θ̄*` of `Ḡ`.
//!
//! The dither averages are computed with the periodic trapezoidal rule:
//!
//! ```text
//! Ḡ(θ̄) = (1/(aπ)) ∫₀^{2π} sin τ · J(θ̄ + a sin τ) dτ
//! H̄(θ̄) = (8/(a²π)) ∫₀^{2π} (sin²τ − ½) · J(θ̄ + a sin τ) dτ
//! ```
//!
//! Both weight functions have zero mean, so `J(θ̄)` is subtracted from the
//! integrand before summing. This is exact on the discrete rule and keeps
//! cancellation error proportional to the variation of `J` over the dither
//! rather than to `J` itself.

use std::f64::consts::SQRT_2;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::PeriodicRule;
use crate::scalar_maps::ScalarMap;

fn check_amplitude(a: f64) -> Result<()> {
    if a == 0.0 || !a.is_finite() {
        return Err(invalid(format!("dither amplitude must be finite and nonzero, got {a}")));
    }
    Ok(())
}

/// A map paired with a dither amplitude and a quadrature rule.
///
/// Construction validates `a ≠ 0`; evaluation is infallible.
#[derive(Debug, Clone)]
pub struct AveragedMap {
    map: ScalarMap,
    amplitude: f64,
    rule: PeriodicRule,
}

impl AveragedMap {
    pub fn new(map: ScalarMap, amplitude: f64, rule: PeriodicRule) -> Result<Self> {
        check_amplitude(amplitude)?;
        Ok(AveragedMap { map, amplitude, rule })
    }

    pub fn map(&self) -> &ScalarMap {
        &self.map
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn rule(&self) -> &PeriodicRule {
        &self.rule
    }

    #[inline]
    fn first_moment<F: Fn(f64) -> f64>(&self, f: F, theta: f64) -> f64 {
        let a = self.amplitude;
        let f0 = f(theta);
        2.0 / a * self.rule.mean_over_sine(|s| s * (f(theta + a * s) - f0))
    }

    #[inline]
    fn second_moment<F: Fn(f64) -> f64>(&self, f: F, theta: f64) -> f64 {
        let a = self.amplitude;
        let f0 = f(theta);
        16.0 / (a * a) * self.rule.mean_over_sine(|s| (s * s - 0.5) * (f(theta + a * s) - f0))
    }

    /// `Ḡ(θ̄)`.
    pub fn gradient(&self, theta: f64) -> f64 {
        self.first_moment(|t| self.map.eval(t), theta)
    }

    /// `H̄(θ̄)`.
    pub fn hessian(&self, theta: f64) -> f64 {
        self.second_moment(|t| self.map.eval(t), theta)
    }

    /// `Ḡ'(θ̄)`, differentiating under the integral sign.
    pub fn gradient_deriv(&self, theta: f64) -> f64 {
        self.first_moment(|t| self.map.grad(t), theta)
    }

    /// `H̄'(θ̄)`.
    pub fn hessian_deriv(&self, theta: f64) -> f64 {
        self.second_moment(|t| self.map.grad(t), theta)
    }

    /// `(Ḡ, H̄, H̄')` in one pass over the nodes.
    pub fn estimates(&self, theta: f64) -> Estimates {
        let a = self.amplitude;
        let (j0, d0) = (self.map.eval(theta), self.map.grad(theta));
        let (mut g, mut h, mut hp) = (0.0, 0.0, 0.0);
        for &s in self.rule.sines() {
            let x = theta + a * s;
            let w = s * s - 0.5;
            let dj = self.map.eval(x) - j0;
            g += s * dj;
            h += w * dj;
            hp += w * (self.map.grad(x) - d0);
        }
        let n = self.rule.n_nodes() as f64;
        Estimates {
            gradient: 2.0 / a * g / n,
            hessian: 16.0 / (a * a) * h / n,
            hessian_deriv: 16.0 / (a * a) * hp / n,
        }
    }

    /// `(J'(θ̄ − |a|), J'(θ̄ + |a|))`; strictly brackets `Ḡ(θ̄)` for
    /// strictly convex maps.
    pub fn gradient_bounds(&self, theta: f64) -> (f64, f64) {
        let a = self.amplitude.abs();
        (self.map.grad(theta - a), self.map.grad(theta + a))
    }

    /// Closed-form strictly positive lower bound on `H̄(θ̄)`, with the
    /// `∫ J''` term evaluated as a difference of `J'`.
    pub fn hessian_lower_bound(&self, theta: f64) -> f64 {
        let a = self.amplitude.abs();
        let r = a / SQRT_2;
        let midpoint_gap = 0.5 * self.map.eval(theta + r) + 0.5 * self.map.eval(theta - r) - self.map.eval(theta);
        let curvature = self.map.grad(theta + r) - self.map.grad(theta - r);
        lower_bound_combination(a, midpoint_gap, curvature)
    }

    /// As [`hessian_lower_bound`](Self::hessian_lower_bound) but with
    /// `∫ J''` computed by composite Simpson.
    pub fn hessian_lower_bound_quadrature(&self, theta: f64, panels: usize) -> f64 {
        let a = self.amplitude.abs();
        let r = a / SQRT_2;
        let midpoint_gap = 0.5 * self.map.eval(theta + r) + 0.5 * self.map.eval(theta - r) - self.map.eval(theta);
        let curvature = crate::quadrature::simpson(|p| self.map.hess(p), theta - r, theta + r, panels);
        lower_bound_combination(a, midpoint_gap, curvature)
    }

    /// Bisection for the zero of `Ḡ` on `[θ* − |a|, θ* + |a|]`.
    ///
    /// Stops when the bracket is narrower than `tol`.
    pub fn find_equilibrium(&self, tol: f64) -> Result<EquilibriumResult> {
        if !(tol > 0.0) {
            return Err(invalid(format!("equilibrium tolerance must be positive, got {tol}")));
        }
        let theta_star = self
            .map
            .known_minimizer()
            .ok_or_else(|| invalid(format!("map `{}` has no known minimizer", self.map.name())))?;
        let a = self.amplitude.abs();
        let bracket = (theta_star - a, theta_star + a);
        let (mut lo, mut hi) = bracket;
        let (g_lo, g_hi) = (self.gradient(lo), self.gradient(hi));
        if !(g_lo < 0.0 && g_hi > 0.0) {
            return Err(Error::Bracket { lo, hi, g_lo, g_hi });
        }
        let mut iterations = 0;
        while hi - lo >= tol && iterations < 200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let g = self.gradient(mid);
            if g == 0.0 {
                lo = mid;
                hi = mid;
                break;
            } else if g < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        let theta_bar_star = 0.5 * (lo + hi);
        Ok(EquilibriumResult {
            theta_bar_star,
            bracket,
            iterations,
            residual: self.gradient(theta_bar_star).abs(),
            gamma_star: 1.0 / self.hessian(theta_bar_star),
        })
    }
}

fn lower_bound_combination(a: f64, midpoint_gap: f64, curvature: f64) -> f64 {
    3.0 * (2.0 * SQRT_2 - 1.0) / (4.0 * PI * a * a) * midpoint_gap + 3.0 * SQRT_2 / (4.0 * PI * a) * curvature
}

/// `Ḡ`, `H̄` and `H̄'` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    pub gradient: f64,
    pub hessian: f64,
    pub hessian_deriv: f64,
}

/// Zero `θ̄*` of the averaged gradient and the matching `Γ̄* = 1/H̄(θ̄*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub theta_bar_star: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub residual: f64,
    pub gamma_star: f64,
}

pub fn avg_gradient(map: &ScalarMap, theta: f64, a: f64, rule: &PeriodicRule) -> Result<f64> {
    Ok(AveragedMap::new(map.clone(), a, rule.clone())?.gradient(theta))
}

pub fn avg_hessian(map: &ScalarMap, theta: f64, a: f64, rule: &PeriodicRule) -> Result<f64> {
    Ok(AveragedMap::new(map.clone(), a, rule.clone())?.hessian(theta))
}

pub fn avg_gradient_deriv(map: &ScalarMap, theta: f64, a: f64, rule: &PeriodicRule) -> Result<f64> {
    Ok(AveragedMap::new(map.clone(), a, rule.clone())?.gradient_deriv(theta))
}

pub fn avg_hessian_deriv(map: &ScalarMap, theta: f64, a: f64, rule: &PeriodicRule) -> Result<f64> {
    Ok(AveragedMap::new(map.clone(), a, rule.clone())?.hessian_deriv(theta))
}

pub fn gradient_bounds(map: &ScalarMap, theta: f64, a: f64) -> Result<(f64, f64)> {
    check_amplitude(a)?;
    let a = a.abs();
    Ok((map.grad(theta - a), map.grad(theta + a)))
}

pub fn hessian_lower_bound(map: &ScalarMap, theta: f64, a: f64) -> Result<f64> {
    check_amplitude(a)?;
    let a = a.abs();
    let r = a / SQRT_2;
    let gap = 0.5 * map.eval(theta + r) + 0.5 * map.eval(theta - r) - map.eval(theta);
    Ok(lower_bound_combination(a, gap, map.grad(theta + r) - map.grad(theta - r)))
}

pub fn find_equilibrium(map: &ScalarMap, a: f64, tol: f64, rule: &PeriodicRule) -> Result<EquilibriumResult> {
    AveragedMap::new(map.clone(), a, rule.clone())?.find_equilibrium(tol)
}

/// One row of the averaged-estimate table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageRow {
    pub theta: f64,
    pub g_avg: f64,
    pub h_avg: f64,
    pub g_avg_prime: f64,
    pub h_avg_prime: f64,
    pub j_prime: f64,
    pub j_second: f64,
    pub h_lower_bound: f64,
}

impl AverageRow {
    pub const HEADER: &'static str = "theta,G_avg,H_avg,G_avg_prime,H_avg_prime,J_prime,J_second,H_lower_bound";

    pub fn values(&self) -> [f64; 8] {
        [
            self.theta,
            self.g_avg,
            self.h_avg,
            self.g_avg_prime,
            self.h_avg_prime,
            self.j_prime,
            self.j_second,
            self.h_lower_bound,
        ]
    }
}

impl AveragedMap {
    pub fn table_row(&self, theta: f64) -> AverageRow {
        let est = self.estimates(theta);
        AverageRow {
            theta,
            g_avg: est.gradient,
            h_avg: est.hessian,
            g_avg_prime: self.gradient_deriv(theta),
            h_avg_prime: est.hessian_deriv,
            j_prime: self.map.grad(theta),
            j_second: self.map.hess(theta),
            h_lower_bound: self.hessian_lower_bound(theta),
        }
    }
}
