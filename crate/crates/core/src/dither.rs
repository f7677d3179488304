//! Sinusoidal perturbation `S(t)` and the demodulation signals `M(t)` and
//! `N(t)` that turn the perturbed cost into gradient and Hessian estimates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Dither amplitude `a` (nonzero) and angular frequency `ω` (positive, rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DitherSpec {
    #[serde(rename = "a")]
    pub amplitude: f64,
    pub omega: f64,
}

impl DitherSpec {
    pub fn new(amplitude: f64, omega: f64) -> Result<Self> {
        let spec = DitherSpec { amplitude, omega };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitude == 0.0 || !self.amplitude.is_finite() {
            return Err(invalid(format!("dither amplitude must be finite and nonzero, got {}", self.amplitude)));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(invalid(format!("dither frequency must be positive, got {}", self.omega)));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// `S(t) = a sin(ωt)`.
    #[inline]
    pub fn perturbation(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t).sin()
    }

    /// `M(t) = 2 sin(ωt) / a`.
    #[inline]
    pub fn demod_gradient(&self, t: f64) -> f64 {
        2.0 * (self.omega * t).sin() / self.amplitude
    }

    /// `N(t) = (16/a²)(sin²(ωt) − 1/2)`.
    #[inline]
    pub fn demod_hessian(&self, t: f64) -> f64 {
        let s = (self.omega * t).sin();
        16.0 / (self.amplitude * self.amplitude) * (s * s - 0.5)
    }

    /// `(S, M, N)` at `t` sharing one sine evaluation.
    #[inline]
    pub fn signals(&self, t: f64) -> (f64, f64, f64) {
        let s = (self.omega * t).sin();
        let a = self.amplitude;
        (a * s, 2.0 * s / a, 16.0 / (a * a) * (s * s - 0.5))
    }
}

pub fn perturbation(spec: &DitherSpec, t: f64) -> f64 {
    spec.perturbation(t)
}

pub fn demod_gradient(spec: &DitherSpec, t: f64) -> f64 {
    spec.demod_gradient(t)
}

pub fn demod_hessian(spec: &DitherSpec, t: f64) -> f64 {
    spec.demod_hessian(t)
}
