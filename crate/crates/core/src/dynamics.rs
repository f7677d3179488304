//! Right-hand sides of the gradient and Newton extremum seeking systems:
//! model-based and perturbation-based GESC, full and averaged NESC, and the
//! NESC in the two error coordinate systems used for its stability
//! analysis.
//!
//! Averaged quantities in error coordinates are always evaluated at the
//! absolute parameter `θ = θ̃ + θ̄*`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::averaging::{AveragedMap, EquilibriumResult};
use crate::dither::DitherSpec;
use crate::error::{invalid, Error, Result};
use crate::quadrature::PeriodicRule;
use crate::scalar_maps::ScalarMap;

/// Dither plus the parameter gain `k` and Riccati filter gain `ω_l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscParams {
    #[serde(flatten)]
    pub dither: DitherSpec,
    pub k: f64,
    pub omega_l: f64,
}

impl EscParams {
    pub fn new(a: f64, omega: f64, k: f64, omega_l: f64) -> Result<Self> {
        let p = EscParams { dither: DitherSpec { amplitude: a, omega }, k, omega_l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.dither.validate()?;
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(invalid(format!("gain k must be positive, got {}", self.k)));
        }
        if !(self.omega_l > 0.0) || !self.omega_l.is_finite() {
            return Err(invalid(format!("filter gain omega_l must be positive, got {}", self.omega_l)));
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        self.dither.amplitude
    }

    pub fn omega(&self) -> f64 {
        self.dither.omega
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.dither.omega = omega;
        self
    }
}

/// `(θ̂, Γ̂)`, valid on the half-plane `Γ̂ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NescState {
    pub theta_hat: f64,
    pub gamma_hat: f64,
}

impl NescState {
    pub fn new(theta_hat: f64, gamma_hat: f64) -> Self {
        NescState { theta_hat, gamma_hat }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.theta_hat, self.gamma_hat]
    }

    pub fn from_array(x: [f64; 2]) -> Self {
        NescState { theta_hat: x[0], gamma_hat: x[1] }
    }
}

/// `(θ̃, γ̃) = (θ̂ − θ̄*, ln(Γ̂ H̄(θ̂)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStateLog {
    pub theta_err: f64,
    pub gamma_err: f64,
}

/// `(θ̃, Γ̃) = (θ̂ − θ̄*, Γ̂ − Γ̄*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStateGamma {
    pub theta_err: f64,
    pub inv_hessian_err: f64,
}

/// Coordinate system a trajectory is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoordSystem {
    /// Full time-varying NESC in `(θ̂, Γ̂)`.
    #[serde(rename = "full")]
    Full,
    /// Averaged NESC in `(θ̄, Γ̄)`.
    #[serde(rename = "avg")]
    Avg,
    /// Averaged NESC in `(θ̃, γ̃)`.
    #[serde(rename = "err-log")]
    ErrLog,
    /// Averaged NESC in `(θ̃, Γ̃)`.
    #[serde(rename = "err-gamma")]
    ErrGamma,
    #[serde(rename = "gesc-model")]
    GescModel,
    #[serde(rename = "gesc-full")]
    GescFull,
    #[serde(rename = "gesc-avg")]
    GescAvg,
}

impl CoordSystem {
    pub const ALL: [CoordSystem; 7] = [
        CoordSystem::Full,
        CoordSystem::Avg,
        CoordSystem::ErrLog,
        CoordSystem::ErrGamma,
        CoordSystem::GescModel,
        CoordSystem::GescFull,
        CoordSystem::GescAvg,
    ];

    pub fn id(self) -> &'static str {
        match self {
            CoordSystem::Full => "full",
            CoordSystem::Avg => "avg",
            CoordSystem::ErrLog => "err-log",
            CoordSystem::ErrGamma => "err-gamma",
            CoordSystem::GescModel => "gesc-model",
            CoordSystem::GescFull => "gesc-full",
            CoordSystem::GescAvg => "gesc-avg",
        }
    }

    /// Names of the state components, in CSV column order.
    pub fn component_names(self) -> &'static [&'static str] {
        match self {
            CoordSystem::Full => &["theta_hat", "gamma_hat"],
            CoordSystem::Avg => &["theta_bar", "gamma_bar"],
            CoordSystem::ErrLog => &["theta_err", "gamma_err"],
            CoordSystem::ErrGamma => &["theta_err", "Gamma_err"],
            CoordSystem::GescModel | CoordSystem::GescFull => &["theta_hat"],
            CoordSystem::GescAvg => &["theta_bar"],
        }
    }

    pub fn dim(self) -> usize {
        self.component_names().len()
    }

    /// Time-varying (dithered) systems; these record the sensor output `y`.
    pub fn is_full(self) -> bool {
        matches!(self, CoordSystem::Full | CoordSystem::GescFull)
    }

    /// Index of the component that must stay positive, if any.
    pub fn guard(self) -> Option<usize> {
        match self {
            CoordSystem::Full | CoordSystem::Avg => Some(1),
            _ => None,
        }
    }

    pub fn needs_equilibrium(self) -> bool {
        matches!(self, CoordSystem::ErrLog | CoordSystem::ErrGamma)
    }
}

impl fmt::Display for CoordSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CoordSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CoordSystem::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| Error::UnknownCoordinates(s.to_string()))
    }
}

fn check_domain(gamma: f64) -> Result<()> {
    if gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { gamma })
    }
}

/// Model-based GESC: `θ̇ = −k J'(θ)`.
pub fn gesc_model_rhs(map: &ScalarMap, k: f64, theta: f64) -> f64 {
    -k * map.grad(theta)
}

/// Perturbation-based GESC: `θ̇ = −k M(t) J(θ + S(t))`.
pub fn gesc_perturb_rhs(map: &ScalarMap, params: &EscParams, t: f64, theta: f64) -> f64 {
    let (s, m, _) = params.dither.signals(t);
    -params.k * m * map.eval(theta + s)
}

/// Full scalar NESC.
pub fn nesc_rhs(map: &ScalarMap, params: &EscParams, t: f64, state: NescState) -> Result<(f64, f64)> {
    check_domain(state.gamma_hat)?;
    let (s, m, n) = params.dither.signals(t);
    let y = map.eval(state.theta_hat + s);
    let (g_hat, h_hat) = (m * y, n * y);
    let gamma = state.gamma_hat;
    Ok((-params.k * gamma * g_hat, params.omega_l * gamma * (1.0 - gamma * h_hat)))
}

/// Averaged NESC.
pub fn nesc_avg_rhs(avg: &AveragedMap, params: &EscParams, state: NescState) -> Result<(f64, f64)> {
    check_domain(state.gamma_hat)?;
    let gamma = state.gamma_hat;
    let g = avg.gradient(state.theta_hat);
    let h = avg.hessian(state.theta_hat);
    Ok((-params.k * gamma * g, params.omega_l * gamma * (1.0 - gamma * h)))
}

/// A map, gains and quadrature bundled for repeated RHS evaluation.
#[derive(Debug, Clone)]
pub struct NescSystem {
    avg: AveragedMap,
    params: EscParams,
}

impl NescSystem {
    pub fn new(map: ScalarMap, params: EscParams, rule: PeriodicRule) -> Result<Self> {
        params.validate()?;
        let avg = AveragedMap::new(map, params.a(), rule)?;
        Ok(NescSystem { avg, params })
    }

    pub fn map(&self) -> &ScalarMap {
        self.avg.map()
    }

    pub fn averaged(&self) -> &AveragedMap {
        &self.avg
    }

    pub fn params(&self) -> &EscParams {
        &self.params
    }

    /// Sensor output `y = J(θ̂ + S(t))`.
    pub fn output(&self, t: f64, theta_hat: f64) -> f64 {
        self.map().eval(theta_hat + self.params.dither.perturbation(t))
    }

    pub fn full_rhs(&self, t: f64, x: [f64; 2]) -> Result<[f64; 2]> {
        let (a, b) = nesc_rhs(self.map(), &self.params, t, NescState::from_array(x))?;
        Ok([a, b])
    }

    pub fn avg_rhs(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let (a, b) = nesc_avg_rhs(&self.avg, &self.params, NescState::from_array(x))?;
        Ok([a, b])
    }

    pub fn gesc_model_rhs(&self, theta: f64) -> f64 {
        gesc_model_rhs(self.map(), self.params.k, theta)
    }

    pub fn gesc_full_rhs(&self, t: f64, theta: f64) -> f64 {
        gesc_perturb_rhs(self.map(), &self.params, t, theta)
    }

    pub fn gesc_avg_rhs(&self, theta: f64) -> f64 {
        -self.params.k * self.avg.gradient(theta)
    }

    /// Solves for `θ̄*` and returns the system in error coordinates.
    pub fn with_equilibrium(self, tol: f64) -> Result<ErrorSystem> {
        let equilibrium = self.avg.find_equilibrium(tol)?;
        Ok(ErrorSystem { sys: self, equilibrium })
    }
}

/// A [`NescSystem`] with its averaged equilibrium `(θ̄*, Γ̄*)`.
#[derive(Debug, Clone)]
pub struct ErrorSystem {
    sys: NescSystem,
    equilibrium: EquilibriumResult,
}

impl ErrorSystem {
    pub fn system(&self) -> &NescSystem {
        &self.sys
    }

    pub fn equilibrium(&self) -> &EquilibriumResult {
        &self.equilibrium
    }

    pub fn theta_bar_star(&self) -> f64 {
        self.equilibrium.theta_bar_star
    }

    pub fn gamma_star(&self) -> f64 {
        self.equilibrium.gamma_star
    }

    pub fn to_log(&self, s: NescState) -> Result<ErrorStateLog> {
        check_domain(s.gamma_hat)?;
        let h = self.sys.avg.hessian(s.theta_hat);
        Ok(ErrorStateLog { theta_err: s.theta_hat - self.theta_bar_star(), gamma_err: (s.gamma_hat * h).ln() })
    }

    pub fn from_log(&self, e: ErrorStateLog) -> NescState {
        let theta_hat = e.theta_err + self.theta_bar_star();
        NescState { theta_hat, gamma_hat: e.gamma_err.exp() / self.sys.avg.hessian(theta_hat) }
    }

    pub fn to_gamma(&self, s: NescState) -> ErrorStateGamma {
        ErrorStateGamma { theta_err: s.theta_hat - self.theta_bar_star(), inv_hessian_err: s.gamma_hat - self.gamma_star() }
    }

    pub fn from_gamma(&self, e: ErrorStateGamma) -> NescState {
        NescState { theta_hat: e.theta_err + self.theta_bar_star(), gamma_hat: e.inv_hessian_err + self.gamma_star() }
    }

    /// Full NESC in `(θ̃, γ̃)`, with `Ĝ = M(t)y` and `Ĥ = N(t)y`.
    pub fn log_error_rhs(&self, t: f64, e: ErrorStateLog) -> [f64; 2] {
        let p = &self.sys.params;
        let theta = e.theta_err + self.theta_bar_star();
        let (s, m, n) = p.dither.signals(t);
        let y = self.sys.map().eval(theta + s);
        let est = self.sys.avg.estimates(theta);
        let eg = e.gamma_err.exp();
        let (g_hat, h_hat) = (m * y, n * y);
        [
            -p.k * eg * g_hat / est.hessian,
            p.omega_l * (1.0 - eg * h_hat / est.hessian) - p.k * eg * g_hat * est.hessian_deriv / (est.hessian * est.hessian),
        ]
    }

    /// Averaged NESC in `(θ̃, γ̃)`.
    pub fn log_error_avg_rhs(&self, e: ErrorStateLog) -> [f64; 2] {
        let p = &self.sys.params;
        let est = self.sys.avg.estimates(e.theta_err + self.theta_bar_star());
        let eg = e.gamma_err.exp();
        [
            -p.k * eg * est.gradient / est.hessian,
            p.omega_l * (1.0 - eg) - p.k * eg * est.gradient * est.hessian_deriv / (est.hessian * est.hessian),
        ]
    }

    /// Full NESC in `(θ̃, Γ̃)`.
    pub fn gamma_error_rhs(&self, t: f64, e: ErrorStateGamma) -> Result<[f64; 2]> {
        let (a, b) = nesc_rhs(self.sys.map(), &self.sys.params, t, self.from_gamma(e))?;
        Ok([a, b])
    }

    /// Averaged NESC in `(θ̃, Γ̃)`. Uses the sign of the `Γ̂` equation; the
    /// origin is the equilibrium with eigenvalue `−ω_l` in `Γ̃`.
    pub fn gamma_error_avg_rhs(&self, e: ErrorStateGamma) -> Result<[f64; 2]> {
        let gamma = e.inv_hessian_err + self.gamma_star();
        check_domain(gamma)?;
        let p = &self.sys.params;
        let theta = e.theta_err + self.theta_bar_star();
        let avg = &self.sys.avg;
        Ok([-p.k * gamma * avg.gradient(theta), p.omega_l * gamma * (1.0 - gamma * avg.hessian(theta))])
    }
}

/// `nesc_error_rhs` in free-function form.
pub fn nesc_error_rhs(sys: &ErrorSystem, t: f64, state: ErrorStateLog) -> (f64, f64) {
    let [a, b] = sys.log_error_rhs(t, state);
    (a, b)
}

pub fn nesc_avg_error_rhs(sys: &ErrorSystem, state: ErrorStateLog) -> (f64, f64) {
    let [a, b] = sys.log_error_avg_rhs(state);
    (a, b)
}

pub fn nesc_gamma_error_avg_rhs(sys: &ErrorSystem, state: ErrorStateGamma) -> Result<(f64, f64)> {
    let [a, b] = sys.gamma_error_avg_rhs(state)?;
    Ok((a, b))
}
