//! Quadrature rules: the uniform periodic trapezoidal rule used for the
//! dither averages, and composite Simpson for proper integrals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Uniform periodic trapezoidal rule on `[0, 2π)`.
///
/// Equal weights `2π/n` at `τ_j = 2πj/n`. Exact for trigonometric
/// polynomials of degree below `n`, spectrally accurate for smooth periodic
/// integrands. The node sines are tabulated once and shared read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicRule {
    sines: Vec<f64>,
}

/// Serializable description of a [`PeriodicRule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub n_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { n_nodes: PeriodicRule::DEFAULT_NODES }
    }
}

impl QuadratureSpec {
    pub fn build(&self) -> Result<PeriodicRule> {
        PeriodicRule::new(self.n_nodes)
    }
}

impl Default for PeriodicRule {
    fn default() -> Self {
        PeriodicRule::new(Self::DEFAULT_NODES).expect("default node count is valid")
    }
}

impl PeriodicRule {
    pub const DEFAULT_NODES: usize = 512;

    /// `n_nodes` must be a power of two and at least 16.
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 16 || !n_nodes.is_power_of_two() {
            return Err(invalid(format!(
                "quadrature node count must be a power of two >= 16, got {n_nodes}"
            )));
        }
        let sines = (0..n_nodes)
            .map(|j| (2.0 * PI * j as f64 / n_nodes as f64).sin())
            .collect();
        Ok(PeriodicRule { sines })
    }

    pub fn n_nodes(&self) -> usize {
        self.sines.len()
    }

    pub fn spec(&self) -> QuadratureSpec {
        QuadratureSpec { n_nodes: self.n_nodes() }
    }

    /// `sin τ_j` at every node.
    pub fn sines(&self) -> &[f64] {
        &self.sines
    }

    /// Mean of `f(sin τ)` over one period, i.e. `(1/2π)∫₀^{2π} f(sin τ) dτ`.
    pub fn mean_over_sine<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let sum: f64 = self.sines.iter().map(|&s| f(s)).sum();
        sum / self.sines.len() as f64
    }
}

/// Mean of `f(t)` over one period `[t0, t0 + period)` by the periodic
/// trapezoidal rule with `samples` equally spaced points.
pub fn periodic_mean<F: Fn(f64) -> f64>(f: F, t0: f64, period: f64, samples: usize) -> f64 {
    let h = period / samples as f64;
    let sum: f64 = (0..samples).map(|i| f(t0 + i as f64 * h)).sum();
    sum / samples as f64
}

/// Composite Simpson rule with `panels` panels (rounded up to even) on
/// `[lo, hi]`. Works for `hi < lo` with the usual sign convention.
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (hi - lo) / n as f64;
    if h == 0.0 {
        return 0.0;
    }
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}
