//! Stability certification for the averaged NESC error system: the
//! constant `β`, the Lyapunov function `V(θ̃, γ̃)` and its derivative along
//! the averaged flow, the linearization at the origin, and empirical
//! practical-stability sweeps of the full dithered system.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ErrorStateGamma, ErrorStateLog, ErrorSystem, EscParams, NescSystem};
use crate::error::{invalid, Result};
use crate::integrator::{IntegrationSpec, Integrator};
use crate::quadrature::{simpson, PeriodicRule};
use crate::scalar_maps::ScalarMap;

/// `(e^γ − 1)/(e^γ − γ)`. The denominator is at least 1 for every real `γ`.
pub fn beta_ratio(gamma: f64) -> f64 {
    gamma.exp_m1() / (gamma.exp() - gamma)
}

/// Supremum of `|beta_ratio|`, where it is attained, and the `β` used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub sup: f64,
    pub argmax: f64,
    pub beta: f64,
}

/// Relative margin added to the numerical supremum.
pub const BETA_MARGIN: f64 = 0.01;

/// Maximizes `|beta_ratio|` on `interval` by a grid scan followed by
/// golden-section refinement to `tol`.
pub fn compute_beta(interval: (f64, f64), tol: f64) -> Result<BetaEstimate> {
    let (lo, hi) = interval;
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(format!("search interval [{lo}, {hi}] is empty")));
    }
    let n = 200_000;
    let step = (hi - lo) / n as f64;
    let f = |g: f64| beta_ratio(g).abs();
    let (mut best, mut best_x) = (f64::NEG_INFINITY, lo);
    for i in 0..=n {
        let x = lo + i as f64 * step;
        let v = f(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let (mut a, mut b) = ((best_x - step).max(lo), (best_x + step).min(hi));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let (sup, argmax) = if f(x) >= best { (f(x), x) } else { (best, best_x) };
    Ok(BetaEstimate { sup, argmax, beta: (1.0 + BETA_MARGIN) * sup })
}

/// The default search: `[−50, 50]` to `1e-12`.
pub fn default_beta() -> BetaEstimate {
    compute_beta((-50.0, 50.0), 1e-12).expect("default search interval is valid")
}

/// Panels per smooth piece of the `θ̃` integral in `V`.
pub const LYAPUNOV_PANELS: usize = 128;

/// Lyapunov function for the averaged error system in `(θ̃, γ̃)`:
///
/// ```text
/// V = ½θ̃² + β ∫₀^θ̃ sgn(φ) |H̄'(φ+θ̄*)| / H̄(φ+θ̄*) dφ + ln(e^γ̃ − γ̃)
/// ```
#[derive(Debug, Clone)]
pub struct LyapunovCertificate {
    sys: ErrorSystem,
    beta: f64,
}

impl LyapunovCertificate {
    pub fn new(sys: ErrorSystem, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(invalid(format!("beta must be positive and finite, got {beta}")));
        }
        Ok(LyapunovCertificate { sys, beta })
    }

    pub fn with_default_beta(sys: ErrorSystem) -> Self {
        LyapunovCertificate { sys, beta: default_beta().beta }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn system(&self) -> &ErrorSystem {
        &self.sys
    }

    fn hbar_pair(&self, theta_err: f64) -> (f64, f64) {
        let est = self.sys.system().averaged().estimates(theta_err + self.sys.theta_bar_star());
        (est.hessian, est.hessian_deriv)
    }

    /// `|H̄'(φ+θ̄*)|/H̄(φ+θ̄*)`; the `sgn(φ)` factor is applied per interval
    /// so that the endpoint `φ = 0` takes the sign of the side integrated.
    fn abs_ratio(&self, phi: f64) -> f64 {
        let (h, hp) = self.hbar_pair(phi);
        hp.abs() / h
    }

    fn integrand(&self, phi: f64) -> f64 {
        phi.signum() * self.abs_ratio(phi)
    }

    /// Zeros of `H̄'(φ + θ̄*)` strictly between 0 and `theta_err`, sorted
    /// from 0 outward.
    fn kinks(&self, theta_err: f64) -> Vec<f64> {
        let hp = |phi: f64| self.hbar_pair(phi).1;
        let m = ((theta_err.abs() / 0.02).ceil() as usize).max(16);
        let step = theta_err / m as f64;
        let mut zeros = Vec::new();
        let mut x0 = 0.0;
        let mut f0 = hp(x0);
        for i in 1..=m {
            let x1 = i as f64 * step;
            let f1 = hp(x1);
            if f0 != 0.0 && f1 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
                let (mut a, mut b, mut fa) = (x0, x1, f0);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if mid == a || mid == b {
                        break;
                    }
                    let fm = hp(mid);
                    if (fm < 0.0) == (fa < 0.0) {
                        a = mid;
                        fa = fm;
                    } else {
                        b = mid;
                    }
                }
                zeros.push(0.5 * (a + b));
            } else if f1 == 0.0 && i < m {
                zeros.push(x1);
            }
            x0 = x1;
            f0 = f1;
        }
        zeros
    }

    /// `∫₀^θ̃ sgn(φ)|H̄'|/H̄ dφ`, by Simpson on each piece between zeros of
    /// `H̄'` so that every piece has a smooth integrand.
    pub fn theta_integral(&self, theta_err: f64) -> f64 {
        if theta_err == 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        let mut lo = 0.0;
        for z in self.kinks(theta_err).into_iter().chain(std::iter::once(theta_err)) {
            total += simpson(|p| self.abs_ratio(p), lo, z, LYAPUNOV_PANELS);
            lo = z;
        }
        theta_err.signum() * total
    }

    fn value_from_integral(&self, e: ErrorStateLog, integral: f64) -> f64 {
        0.5 * e.theta_err * e.theta_err + self.beta * integral + (e.gamma_err.exp() - e.gamma_err).ln()
    }

    /// `V(θ̃, γ̃)`.
    pub fn value(&self, e: ErrorStateLog) -> f64 {
        self.value_from_integral(e, self.theta_integral(e.theta_err))
    }

    /// The three terms of `V̇` along the averaged error flow:
    ///
    /// ```text
    /// −k e^γ̃ |Ḡ H̄'| / H̄² · (β + r(γ̃) sgn(θ̃ H̄'))
    /// −k e^γ̃ Ḡ θ̃ / H̄
    /// −ω_l (e^γ̃ − 1)² / (e^γ̃ − γ̃)
    /// ```
    pub fn dot_terms(&self, e: ErrorStateLog) -> [f64; 3] {
        let p = self.sys.system().params();
        let est = self.sys.system().averaged().estimates(e.theta_err + self.sys.theta_bar_star());
        let eg = e.gamma_err.exp();
        let h2 = est.hessian * est.hessian;
        let em1 = e.gamma_err.exp_m1();
        [
            -p.k * eg * (est.gradient * est.hessian_deriv).abs() / h2 * self.beta_factor_with(e, est.hessian_deriv),
            -p.k * eg * est.gradient * e.theta_err / est.hessian,
            -p.omega_l * em1 * em1 / (eg - e.gamma_err),
        ]
    }

    /// `V̇(θ̃, γ̃)`.
    pub fn dot(&self, e: ErrorStateLog) -> f64 {
        self.dot_terms(e).iter().sum()
    }

    fn beta_factor_with(&self, e: ErrorStateLog, hessian_deriv: f64) -> f64 {
        self.beta + beta_ratio(e.gamma_err) * (e.theta_err * hessian_deriv).signum()
    }

    /// Bracketed factor of the first term of `V̇`; nonnegative whenever
    /// `β ≥ sup |r|`.
    pub fn beta_factor(&self, e: ErrorStateLog) -> f64 {
        let (_, hp) = self.hbar_pair(e.theta_err);
        self.beta_factor_with(e, hp)
    }

    /// Central difference of `V` along the averaged error vector field,
    /// with a state-space displacement of `delta`.
    ///
    /// The `θ̃` integrals at the two shifted points share the segment from 0
    /// to the nearer endpoint; it cancels exactly in `V(x⁺) − V(x⁻)`, so
    /// only the short segment between them is integrated. Differencing two
    /// separate 128-panel integrals instead would add the `θ̃`-derivative of
    /// their discretization error, about 1e-6 relative at `|θ̃| ≈ 3`.
    pub fn dot_finite_difference(&self, e: ErrorStateLog, delta: f64) -> f64 {
        let f = self.sys.log_error_avg_rhs(e);
        let norm = f[0].hypot(f[1]);
        if norm == 0.0 {
            return 0.0;
        }
        let h = delta / norm;
        let (tp, tm) = (e.theta_err + h * f[0], e.theta_err - h * f[0]);
        let (gp, gm) = (e.gamma_err + h * f[1], e.gamma_err - h * f[1]);
        let quad = 0.5 * (tp * tp - tm * tm);
        let integral = simpson(|p| self.integrand(p), tm, tp, LYAPUNOV_PANELS);
        let log = ((gp.exp() - gp) / (gm.exp() - gm)).ln();
        (quad + self.beta * integral + log) / (2.0 * h)
    }

    /// As [`dot_finite_difference`](Self::dot_finite_difference) but
    /// differencing two full evaluations of [`value`](Self::value).
    pub fn dot_finite_difference_naive(&self, e: ErrorStateLog, delta: f64) -> f64 {
        let f = self.sys.log_error_avg_rhs(e);
        let norm = f[0].hypot(f[1]);
        if norm == 0.0 {
            return 0.0;
        }
        let h = delta / norm;
        let shifted = |s: f64| ErrorStateLog { theta_err: e.theta_err + s * f[0], gamma_err: e.gamma_err + s * f[1] };
        (self.value(shifted(h)) - self.value(shifted(-h))) / (2.0 * h)
    }
}

/// Rectangular grid over `(θ̃, γ̃)` with an excluded ball at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub theta_range: (f64, f64),
    pub gamma_range: (f64, f64),
    pub n_theta: usize,
    pub n_gamma: usize,
    pub exclusion_radius: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { theta_range: (-3.0, 3.0), gamma_range: (-3.0, 3.0), n_theta: 61, n_gamma: 61, exclusion_radius: 1e-3 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let ok_range = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && hi > lo;
        if !ok_range(self.theta_range) || !ok_range(self.gamma_range) {
            return Err(invalid("grid ranges must be finite with lo < hi"));
        }
        if self.n_theta < 2 || self.n_gamma < 2 {
            return Err(invalid("grids need at least two points per axis"));
        }
        if !(self.exclusion_radius >= 0.0) {
            return Err(invalid("exclusion radius must be nonnegative"));
        }
        Ok(())
    }

    fn axis((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn theta_axis(&self) -> Vec<f64> {
        Self::axis(self.theta_range, self.n_theta)
    }

    pub fn gamma_axis(&self) -> Vec<f64> {
        Self::axis(self.gamma_range, self.n_gamma)
    }

    pub fn excludes(&self, theta_err: f64, gamma_err: f64) -> bool {
        theta_err.hypot(gamma_err) < self.exclusion_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSample {
    pub theta_err: f64,
    pub gamma_err: f64,
    pub v: f64,
    pub v_dot: f64,
    pub beta_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovGridReport {
    pub grid: GridSpec,
    pub beta_used: f64,
    pub points_checked: usize,
    pub min_v: f64,
    pub min_v_at: (f64, f64),
    pub max_v_dot: f64,
    pub max_v_dot_at: (f64, f64),
    pub min_beta_factor: f64,
    pub violations: Vec<LyapunovSample>,
    /// Every checked point, in θ̃-major order.
    #[serde(skip)]
    pub samples: Vec<LyapunovSample>,
}

impl LyapunovGridReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluates `V` and `V̇` at every grid point outside the exclusion ball.
pub fn lyapunov_grid(cert: &LyapunovCertificate, grid: &GridSpec) -> Result<LyapunovGridReport> {
    grid.validate()?;
    let gammas = grid.gamma_axis();
    let columns: Vec<Vec<LyapunovSample>> = grid
        .theta_axis()
        .into_par_iter()
        .map(|theta_err| {
            let integral = cert.theta_integral(theta_err);
            gammas
                .iter()
                .filter(|&&g| !grid.excludes(theta_err, g))
                .map(|&gamma_err| {
                    let e = ErrorStateLog { theta_err, gamma_err };
                    LyapunovSample {
                        theta_err,
                        gamma_err,
                        v: cert.value_from_integral(e, integral),
                        v_dot: cert.dot(e),
                        beta_factor: cert.beta_factor(e),
                    }
                })
                .collect()
        })
        .collect();
    let samples: Vec<LyapunovSample> = columns.into_iter().flatten().collect();

    let mut report = LyapunovGridReport {
        grid: *grid,
        beta_used: cert.beta,
        points_checked: samples.len(),
        min_v: f64::INFINITY,
        min_v_at: (f64::NAN, f64::NAN),
        max_v_dot: f64::NEG_INFINITY,
        max_v_dot_at: (f64::NAN, f64::NAN),
        min_beta_factor: f64::INFINITY,
        violations: Vec::new(),
        samples: Vec::new(),
    };
    for s in &samples {
        if s.v < report.min_v || s.v.is_nan() {
            report.min_v = s.v;
            report.min_v_at = (s.theta_err, s.gamma_err);
        }
        if s.v_dot > report.max_v_dot || s.v_dot.is_nan() {
            report.max_v_dot = s.v_dot;
            report.max_v_dot_at = (s.theta_err, s.gamma_err);
        }
        report.min_beta_factor = report.min_beta_factor.min(s.beta_factor);
        if !(s.v > 0.0) || !(s.v_dot < 0.0) {
            report.violations.push(*s);
        }
    }
    report.samples = samples;
    Ok(report)
}

/// Jacobian of the averaged `(θ̃, Γ̃)` system at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linearization {
    pub theta_bar_star: f64,
    pub gamma_star: f64,
    pub eig_theta: f64,
    pub eig_gamma: f64,
    /// Analytic Jacobian; lower triangular.
    pub jacobian: [[f64; 2]; 2],
    /// Central-difference Jacobian of the averaged right-hand side.
    pub jacobian_fd: [[f64; 2]; 2],
}

/// Linearizes the averaged NESC in `(θ̃, Γ̃)` at the origin.
///
/// The eigenvalues are `−k Ḡ'(θ̄*)/H̄(θ̄*)` and `−ω_l`; the lower-left entry
/// is `−ω_l H̄'(θ̄*)/H̄(θ̄*)²`, which does not affect them.
pub fn linearize(sys: &ErrorSystem) -> Result<Linearization> {
    let p = sys.system().params();
    let avg = sys.system().averaged();
    let theta = sys.theta_bar_star();
    let h = avg.hessian(theta);
    let eig_theta = -p.k * avg.gradient_deriv(theta) / h;
    let eig_gamma = -p.omega_l;
    let jacobian = [[eig_theta, -p.k * avg.gradient(theta)], [-p.omega_l * avg.hessian_deriv(theta) / (h * h), eig_gamma]];

    let step = 1e-5;
    let f = |theta_err: f64, inv_hessian_err: f64| sys.gamma_error_avg_rhs(ErrorStateGamma { theta_err, inv_hessian_err });
    let (tp, tm) = (f(step, 0.0)?, f(-step, 0.0)?);
    let (gp, gm) = (f(0.0, step)?, f(0.0, -step)?);
    let jacobian_fd = [
        [(tp[0] - tm[0]) / (2.0 * step), (gp[0] - gm[0]) / (2.0 * step)],
        [(tp[1] - tm[1]) / (2.0 * step), (gp[1] - gm[1]) / (2.0 * step)],
    ];
    Ok(Linearization { theta_bar_star: theta, gamma_star: sys.gamma_star(), eig_theta, eig_gamma, jacobian, jacobian_fd })
}

/// Builds the error system for `map` and linearizes it.
pub fn linearize_map(map: ScalarMap, params: EscParams, rule: PeriodicRule, tol: f64) -> Result<Linearization> {
    linearize(&NescSystem::new(map, params, rule)?.with_equilibrium(tol)?)
}

/// Linear rates of gradient ESC: the model `θ̇ = −kJ'(θ)` at `θ*` and the
/// averaged system `θ̇ = −kḠ(θ)` at `θ̄*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GescLinearization {
    pub theta_star: f64,
    pub model_rate: f64,
    pub theta_bar_star: f64,
    pub averaged_rate: f64,
}

pub fn linearize_gesc(sys: &ErrorSystem) -> Result<GescLinearization> {
    let map = sys.system().map();
    let k = sys.system().params().k;
    let theta_star = map
        .known_minimizer()
        .ok_or_else(|| invalid(format!("map `{}` has no known minimizer", map.name())))?;
    Ok(GescLinearization {
        theta_star,
        model_rate: -k * map.hess(theta_star),
        theta_bar_star: sys.theta_bar_star(),
        averaged_rate: -k * sys.system().averaged().gradient_deriv(sys.theta_bar_star()),
    })
}

/// Settings for [`practical_stability_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub omegas: Vec<f64>,
    pub initial_states: Vec<[f64; 2]>,
    pub horizon: f64,
    /// RK4 steps per dither period.
    #[serde(default = "default_steps_per_period")]
    pub steps_per_period: f64,
    /// Radius of the ball whose first entry time is reported.
    #[serde(default = "default_target_radius")]
    pub target_radius: f64,
    /// Fraction of the horizon, at the end, over which the radius is taken.
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
}

fn default_steps_per_period() -> f64 {
    IntegrationSpec::STEPS_PER_PERIOD
}

fn default_target_radius() -> f64 {
    0.1
}

fn default_tail_fraction() -> f64 {
    0.1
}

impl SweepSpec {
    pub fn new(omegas: Vec<f64>, initial_states: Vec<[f64; 2]>, horizon: f64) -> Self {
        SweepSpec {
            omegas,
            initial_states,
            horizon,
            steps_per_period: default_steps_per_period(),
            target_radius: default_target_radius(),
            tail_fraction: default_tail_fraction(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.omegas.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(invalid("sweep frequencies must be positive"));
        }
        if self.omegas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("sweep frequencies must be strictly ascending"));
        }
        if !(self.horizon > 0.0) {
            return Err(invalid("sweep horizon must be positive"));
        }
        if self.steps_per_period < IntegrationSpec::MIN_STEPS_PER_PERIOD {
            return Err(invalid(format!("need at least {} steps per period", IntegrationSpec::MIN_STEPS_PER_PERIOD)));
        }
        if !(self.target_radius > 0.0) {
            return Err(invalid("target radius must be positive"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(invalid("tail fraction must lie in (0, 1)"));
        }
        if self.initial_states.iter().any(|x| !(x[1] > 0.0)) {
            return Err(invalid("initial Gamma_hat must be positive"));
        }
        Ok(())
    }
}

/// One `(ω, initial state)` run of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub omega: f64,
    pub ic_index: usize,
    /// `sup ‖(θ̂ − θ̄*, Γ̂ − Γ̄*)‖` over the tail window.
    pub tail_radius: Option<f64>,
    pub entry_time: Option<f64>,
    pub fit_m: Option<f64>,
    pub fit_lambda: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PracticalStabilityReport {
    pub omegas: Vec<f64>,
    /// Largest tail radius over initial states, per frequency.
    pub radius: Vec<f64>,
    /// Latest entry time over initial states, per frequency.
    pub entry_time: Vec<Option<f64>>,
    pub runs: Vec<SweepRun>,
    pub monotone_radius: bool,
    pub target_radius: f64,
    pub tail_window: (f64, f64),
    pub theta_bar_star: f64,
    pub gamma_star: f64,
}

/// Least-squares fit of `‖e(t)‖ ≈ M e^{−λt} ‖e(0)‖` on samples `(t, ‖e‖)`.
pub fn fit_exponential_envelope(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    let e0 = samples.first()?.1;
    if samples.len() < 2 || !(e0 > 0.0) {
        return None;
    }
    let n = samples.len() as f64;
    let (st, sy) = samples.iter().fold((0.0, 0.0), |(a, b), &(t, e)| (a + t, b + e.ln()));
    let (mt, my) = (st / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(t, e) in samples {
        sxx += (t - mt) * (t - mt);
        sxy += (t - mt) * (e.ln() - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    Some((intercept.exp() / e0, -slope))
}

fn sweep_run(template: &ErrorSystem, spec: &SweepSpec, omega: f64, ic_index: usize) -> SweepRun {
    let mut run = SweepRun { omega, ic_index, tail_radius: None, entry_time: None, fit_m: None, fit_lambda: None, failure: None };
    let sys = match NescSystem::new(
        template.system().map().clone(),
        template.system().params().with_omega(omega),
        template.system().averaged().rule().clone(),
    ) {
        Ok(sys) => sys,
        Err(e) => {
            run.failure = Some(e.to_string());
            return run;
        }
    };
    let ispec = IntegrationSpec {
        dt: 2.0 * std::f64::consts::PI / omega / spec.steps_per_period,
        t_final: spec.horizon,
        record_every: 1,
    };
    let integrator = match Integrator::new(ispec).and_then(|i| i.with_guard(Some(1)).resolving_dither(omega)) {
        Ok(i) => i,
        Err(e) => {
            run.failure = Some(e.to_string());
            return run;
        }
    };
    let (theta_star, gamma_star) = (template.theta_bar_star(), template.gamma_star());
    let tail_start = (1.0 - spec.tail_fraction) * spec.horizon;
    let fit_stride = spec.steps_per_period.round().max(1.0) as usize;
    let mut tail = 0.0f64;
    let mut entry = None;
    let mut samples = Vec::new();
    let outcome = integrator.drive(
        |t, x: &[f64; 2]| sys.full_rhs(t, *x),
        spec.initial_states[ic_index],
        |i, t, x| {
            let err = (x[0] - theta_star).hypot(x[1] - gamma_star);
            if t >= tail_start {
                tail = tail.max(err);
            }
            if entry.is_none() && err <= spec.target_radius {
                entry = Some(t);
            }
            if i % fit_stride == 0 {
                samples.push((t, err));
            }
        },
    );
    match outcome {
        Ok(o) if o.domain_exit.is_none() => {
            run.tail_radius = Some(tail);
            run.entry_time = entry;
            let cutoff = 10.0 * tail;
            let window: Vec<(f64, f64)> = samples.iter().copied().take_while(|&(_, e)| e > cutoff).collect();
            if let Some((m, lambda)) = fit_exponential_envelope(&window) {
                run.fit_m = Some(m);
                run.fit_lambda = Some(lambda);
            }
        }
        Ok(o) => {
            let exit = o.domain_exit.expect("checked above");
            run.failure = Some(format!("domain exit at t = {}", exit.t));
        }
        Err(e) => run.failure = Some(e.to_string()),
    }
    run
}

/// Integrates the full NESC for every `(ω, initial state)` pair and
/// measures the tail radius, first entry time into the target ball, and an
/// exponential envelope fitted where the error exceeds ten times the tail
/// radius. Failed runs are recorded and the sweep continues.
pub fn practical_stability_sweep(template: &ErrorSystem, spec: &SweepSpec) -> Result<PracticalStabilityReport> {
    spec.validate()?;
    let tail_window = ((1.0 - spec.tail_fraction) * spec.horizon, spec.horizon);
    let mut report = PracticalStabilityReport {
        omegas: Vec::new(),
        radius: Vec::new(),
        entry_time: Vec::new(),
        runs: Vec::new(),
        monotone_radius: true,
        target_radius: spec.target_radius,
        tail_window,
        theta_bar_star: template.theta_bar_star(),
        gamma_star: template.gamma_star(),
    };
    if spec.initial_states.is_empty() {
        return Ok(report);
    }
    let n_ic = spec.initial_states.len();
    let jobs: Vec<(f64, usize)> = spec.omegas.iter().flat_map(|&w| (0..n_ic).map(move |i| (w, i))).collect();
    report.runs = jobs.into_par_iter().map(|(w, i)| sweep_run(template, spec, w, i)).collect();
    report.omegas = spec.omegas.clone();
    for chunk in report.runs.chunks(n_ic) {
        let radius = chunk.iter().map(|r| r.tail_radius.unwrap_or(f64::NAN)).fold(f64::NEG_INFINITY, f64::max);
        let radius = if chunk.iter().any(|r| r.tail_radius.is_none()) { f64::NAN } else { radius };
        report.radius.push(radius);
        let entry = chunk.iter().map(|r| r.entry_time).try_fold(f64::NEG_INFINITY, |acc, t| t.map(|t| acc.max(t)));
        report.entry_time.push(entry);
    }
    report.monotone_radius = report.radius.iter().all(|r| r.is_finite()) && report.radius.windows(2).all(|w| w[1] <= w[0]);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar_maps::builtin_map;

    fn error_system(name: &str, params: EscParams) -> ErrorSystem {
        NescSystem::new(builtin_map(name).unwrap(), params, PeriodicRule::default())
            .unwrap()
            .with_equilibrium(1e-14)
            .unwrap()
    }

    fn paper_cert() -> LyapunovCertificate {
        LyapunovCertificate::with_default_beta(error_system("paper-example", EscParams::new(0.5, 10.0, 0.001, 0.001).unwrap()))
    }

    fn st(theta_err: f64, gamma_err: f64) -> ErrorStateLog {
        ErrorStateLog { theta_err, gamma_err }
    }

    #[test]
    fn beta_ratio_limits() {
        assert_eq!(beta_ratio(0.0), 0.0);
        assert!((beta_ratio(40.0) - 1.0).abs() < 1e-10);
        assert!(beta_ratio(-40.0).abs() < 0.03);
    }

    #[test]
    fn beta_matches_dense_scan() {
        let est = default_beta();
        let n = 1_000_000;
        let dense = (0..=n).map(|i| beta_ratio(-50.0 + 100.0 * i as f64 / n as f64).abs()).fold(0.0, f64::max);
        assert!(est.sup >= dense - 1e-15);
        assert!(est.sup - dense < 1e-9);
        // Stationarity of the ratio: e^γ(2 − γ) = 1.
        assert!((est.argmax.exp() * (2.0 - est.argmax) - 1.0).abs() < 1e-6);
        assert!((est.sup - 1.1884).abs() < 1e-3);
        assert!((est.beta - 1.01 * est.sup).abs() < 1e-15);
        assert!(compute_beta((-1.0, 1.0), 0.0).is_err());
        assert!(compute_beta((1.0, -1.0), 1e-9).is_err());
    }

    #[test]
    fn value_examples() {
        let cert = paper_cert();
        assert_eq!(cert.value(st(0.0, 0.0)), 0.0);
        assert!(cert.value(st(0.3, -1.0)) > 0.0);
        let quad = LyapunovCertificate::new(error_system("quadratic", EscParams::new(0.5, 10.0, 1.0, 1.0).unwrap()), 3.0).unwrap();
        assert!((quad.value(st(1.0, 0.0)) - 0.5).abs() < 1e-12, "{}", quad.value(st(1.0, 0.0)));
        assert!(LyapunovCertificate::new(quad.system().clone(), 0.0).is_err());
    }

    #[test]
    fn middle_term_matches_adaptive_quadrature() {
        let cert = paper_cert();
        fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        for theta in [0.3f64, -0.3, -2.5, 1.7] {
            let f = |p: f64| theta.signum() * cert.abs_ratio(p);
            let (fa, fm, fb) = (f(0.0), f(0.5 * theta), f(theta));
            let whole = theta / 6.0 * (fa + 4.0 * fm + fb);
            let oracle = adaptive(&f, 0.0, theta, fa, fm, fb, whole, 1e-11, 30);
            let got = cert.theta_integral(theta);
            assert!(got > 0.0);
            // 128 Simpson panels per piece are good to a few parts in 1e7 here.
            assert!((got - oracle).abs() < 1e-6 * oracle.abs(), "{theta}: {got} vs {oracle}");
        }
    }

    #[test]
    fn dot_examples() {
        let cert = paper_cert();
        assert!(cert.dot(st(0.0, 0.0)).abs() < 1e-15);
        assert!(cert.dot(st(0.3, -1.0)) < 0.0);
        let quad = LyapunovCertificate::new(error_system("quadratic", EscParams::new(0.5, 10.0, 1.0, 1.0).unwrap()), 1.2).unwrap();
        assert!((quad.dot(st(0.5, 0.0)) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn dot_matches_finite_difference() {
        let cert = paper_cert();
        for (t, g) in [(0.3, -1.0), (-0.3, 0.5), (-1.2, 2.0), (2.0, -2.5), (-2.8, 0.1), (3.0, 1.0), (-0.05, -3.0)] {
            let e = st(t, g);
            let exact = cert.dot(e);
            let fd = cert.dot_finite_difference(e, 1e-5);
            assert!(((exact - fd) / exact).abs() < 1e-6, "({t}, {g}): {exact} vs {fd}");
            let naive = cert.dot_finite_difference_naive(e, 1e-5);
            assert!(((exact - naive) / exact).abs() < 1e-5, "({t}, {g}): {exact} vs {naive}");
        }
    }

    #[test]
    fn gradient_of_v_along_flow() {
        // Chain-rule form ∇V·f agrees with the closed-form terms.
        let cert = paper_cert();
        let sys = cert.system();
        for (t, g) in [(0.7, 0.4), (-1.9, -1.3), (-0.05, 1.0)] {
            let f = sys.log_error_avg_rhs(st(t, g));
            let grad_theta = t + cert.beta * cert.integrand(t);
            let grad_gamma = beta_ratio(g);
            let chain = grad_theta * f[0] + grad_gamma * f[1];
            assert!(((chain - cert.dot(st(t, g))) / chain).abs() < 1e-12);
        }
    }

    #[test]
    fn small_grid_certifies() {
        let cert = paper_cert();
        let grid = GridSpec { n_theta: 13, n_gamma: 13, ..GridSpec::default() };
        let report = lyapunov_grid(&cert, &grid).unwrap();
        assert_eq!(report.points_checked, 13 * 13 - 1);
        assert!(report.passed(), "{:?}", report.violations);
        assert!(report.min_v > 0.0 && report.max_v_dot < 0.0);
        assert!(report.min_beta_factor >= 0.0);
        assert!(lyapunov_grid(&cert, &GridSpec { n_theta: 1, ..grid }).is_err());
    }

    #[test]
    fn linearization_quadratic_is_exact() {
        let lin = linearize(&error_system("quadratic", EscParams::new(0.5, 10.0, 1.0, 0.001).unwrap())).unwrap();
        assert!((lin.eig_theta + 1.0).abs() < 1e-12);
        assert!((lin.eig_gamma + 0.001).abs() < 1e-15);
    }

    #[test]
    fn linearization_paper_example() {
        let params = EscParams::new(0.5, 10.0, 0.001, 0.001).unwrap();
        let lin = linearize(&error_system("paper-example", params)).unwrap();
        assert!(lin.eig_theta < 0.0 && lin.eig_gamma < 0.0);
        assert!((lin.eig_theta / 0.001 + 1.5355325951258882).abs() < 1e-9);
        for i in 0..2 {
            for j in 0..2 {
                let (a, f) = (lin.jacobian[i][j], lin.jacobian_fd[i][j]);
                assert!((a - f).abs() < 1e-6 * a.abs().max(1e-3), "({i},{j}): {a} vs {f}");
            }
        }
        assert!(lin.jacobian[0][1].abs() < 1e-15);
        assert!(lin.jacobian[1][0] != 0.0);
        let doubled = linearize(&error_system("paper-example", EscParams { k: 0.002, ..params })).unwrap();
        assert!((doubled.eig_theta - 2.0 * lin.eig_theta).abs() < 1e-18);
        assert_eq!(doubled.eig_gamma, lin.eig_gamma);
    }

    #[test]
    fn gesc_rates() {
        let lin = linearize_gesc(&error_system("paper-example", EscParams::new(0.5, 10.0, 0.001, 0.001).unwrap())).unwrap();
        assert_eq!(lin.model_rate, 0.0);
        assert!(lin.averaged_rate < 0.0);
    }

    #[test]
    fn envelope_fit_recovers_exponential() {
        // Starting at t = 1, the envelope relative to e(1) has M = e^{0.7}.
        let samples: Vec<(f64, f64)> = (10..60).map(|i| (i as f64 * 0.1, 3.0 * (-0.7 * i as f64 * 0.1).exp())).collect();
        let (m, lambda) = fit_exponential_envelope(&samples).unwrap();
        assert!((m - 0.7f64.exp()).abs() < 1e-12, "{m}");
        assert!((lambda - 0.7).abs() < 1e-12);
        assert!(fit_exponential_envelope(&samples[..1]).is_none());
    }

    #[test]
    fn sweep_edge_cases() {
        let sys = error_system("quadratic", EscParams::new(0.2, 10.0, 1.0, 1.0).unwrap());
        let empty = practical_stability_sweep(&sys, &SweepSpec::new(vec![5.0, 10.0], vec![], 10.0)).unwrap();
        assert!(empty.runs.is_empty() && empty.radius.is_empty());
        assert!(practical_stability_sweep(&sys, &SweepSpec::new(vec![10.0, 5.0], vec![[1.0, 1.0]], 10.0)).is_err());
    }

    #[test]
    fn sweep_quadratic_settles() {
        let sys = error_system("quadratic", EscParams::new(0.5, 10.0, 0.05, 0.05).unwrap());
        let report = practical_stability_sweep(&sys, &SweepSpec::new(vec![10.0, 20.0], vec![[1.0, 1.0], [-0.5, 0.2]], 300.0)).unwrap();
        assert_eq!(report.runs.len(), 4);
        for run in &report.runs {
            assert!(run.failure.is_none(), "{:?}", run.failure);
            assert!(run.tail_radius.unwrap() < 0.5);
            assert!(run.entry_time.is_some());
            assert!(run.fit_lambda.unwrap() > 0.0);
        }
        assert_eq!(report.runs[2].omega, 20.0);
        assert_eq!(report.runs[3].ic_index, 1);
    }
}
