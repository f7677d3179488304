//! Fixed-step classical Runge–Kutta integration with a positivity guard on
//! one state component and decimated recording on a uniform time grid.

use serde::{Deserialize, Serialize};

use crate::dynamics::{CoordSystem, EscParams};
use crate::error::{invalid, Error, Result};

/// Step size, horizon and recording stride.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSpec {
    pub dt: f64,
    pub t_final: f64,
    pub record_every: usize,
}

impl IntegrationSpec {
    /// Steps per dither period when no step size is given.
    pub const STEPS_PER_PERIOD: f64 = 200.0;
    /// Coarsest step allowed on a dithered system, in steps per period.
    pub const MIN_STEPS_PER_PERIOD: f64 = 50.0;

    /// Default step `(2π/ω)/200`.
    pub fn for_dither(omega: f64, t_final: f64, record_every: usize) -> Self {
        IntegrationSpec { dt: 2.0 * std::f64::consts::PI / omega / Self::STEPS_PER_PERIOD, t_final, record_every }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("step size must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(invalid(format!("final time must be positive, got {}", self.t_final)));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps and the step actually taken: the requested step is
    /// shrunk so that an integer number of steps lands on `t_final`.
    pub fn steps(&self) -> (usize, f64) {
        let n = ((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }
}

/// Where and why integration stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainExit {
    /// Time of the last state that satisfied the guard.
    pub t: f64,
    pub last_state: Vec<f64>,
    /// Guarded value that was rejected, if the step produced one.
    pub rejected_value: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub coord_system: Option<CoordSystem>,
    pub params: Option<EscParams>,
    pub map_name: Option<String>,
}

/// Uniformly sampled states; immutable once returned.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt_record: f64,
    dim: usize,
    data: Vec<f64>,
    outputs: Option<Vec<f64>>,
    pub component_names: Vec<String>,
    pub meta: TrajectoryMeta,
    /// State at the last completed step (may fall between samples).
    pub final_state: Vec<f64>,
    pub t_end: f64,
    pub domain_exit: Option<DomainExit>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt_record
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Recorded sensor output `y`, for dithered systems.
    pub fn outputs(&self) -> Option<&[f64]> {
        self.outputs.as_deref()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.data.chunks_exact(self.dim).enumerate().map(|(i, x)| (self.time(i), x))
    }

    pub fn component(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.chunks_exact(self.dim).map(move |x| x[j])
    }

    pub fn with_names<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        self.component_names = names.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    pub fn with_meta(mut self, meta: TrajectoryMeta) -> Self {
        self.meta = meta;
        self
    }
}

/// Configured RK4 integrator.
#[derive(Debug, Clone)]
pub struct Integrator {
    spec: IntegrationSpec,
    t0: f64,
    guard: Option<usize>,
}

impl Integrator {
    pub fn new(spec: IntegrationSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Integrator { spec, t0: 0.0, guard: None })
    }

    pub fn spec(&self) -> &IntegrationSpec {
        &self.spec
    }

    pub fn starting_at(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    /// Halt when component `index` becomes nonpositive.
    pub fn with_guard(mut self, index: Option<usize>) -> Self {
        self.guard = index;
        self
    }

    /// Requires the step to resolve a dither of frequency `omega`.
    pub fn resolving_dither(self, omega: f64) -> Result<Self> {
        let limit = 2.0 * std::f64::consts::PI / omega / IntegrationSpec::MIN_STEPS_PER_PERIOD;
        if self.spec.dt > limit {
            return Err(invalid(format!(
                "step {} does not resolve the dither: need dt <= (2*pi/omega)/{} = {limit}",
                self.spec.dt,
                IntegrationSpec::MIN_STEPS_PER_PERIOD
            )));
        }
        Ok(self)
    }

    pub fn run<const N: usize, F>(&self, rhs: F, x0: [f64; N]) -> Result<Trajectory>
    where
        F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        self.run_observed(rhs, x0, None::<fn(f64, &[f64; N]) -> f64>, |_, _, _| {})
    }

    /// As [`run`](Self::run), also recording `output(t, x)` at each sample.
    pub fn run_with_output<const N: usize, F, Y>(&self, rhs: F, x0: [f64; N], output: Y) -> Result<Trajectory>
    where
        F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
        Y: Fn(f64, &[f64; N]) -> f64,
    {
        self.run_observed(rhs, x0, Some(output), |_, _, _| {})
    }

    /// Records a trajectory and also passes every step to `observer`, as in
    /// [`drive`](Self::drive).
    pub fn run_observed<const N: usize, F, Y, O>(&self, rhs: F, x0: [f64; N], output: Option<Y>, mut observer: O) -> Result<Trajectory>
    where
        F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
        Y: Fn(f64, &[f64; N]) -> f64,
        O: FnMut(usize, f64, &[f64; N]),
    {
        let (n_steps, dt) = self.spec.steps();
        let stride = self.spec.record_every;
        let capacity = n_steps / stride + 1;
        let mut data = Vec::with_capacity(capacity * N);
        let mut outputs = output.as_ref().map(|_| Vec::with_capacity(capacity));
        let outcome = self.drive(rhs, x0, |i, t, x| {
            if i % stride == 0 {
                data.extend_from_slice(x);
                if let (Some(ys), Some(f)) = (outputs.as_mut(), output.as_ref()) {
                    ys.push(f(t, x));
                }
            }
            observer(i, t, x);
        })?;
        Ok(Trajectory {
            t0: self.t0,
            dt_record: dt * stride as f64,
            dim: N,
            data,
            outputs,
            component_names: (0..N).map(|j| format!("x{j}")).collect(),
            meta: TrajectoryMeta::default(),
            final_state: outcome.final_state.to_vec(),
            t_end: outcome.t_end,
            domain_exit: outcome.domain_exit,
        })
    }

    /// Steps the system, calling `observer(i, t, x)` on the initial state
    /// (`i = 0`) and after every accepted step `i`.
    ///
    /// A domain error from the right-hand side or a nonpositive guarded
    /// component stops the run and is reported in the outcome; a non-finite
    /// state is an error.
    pub fn drive<const N: usize, F, O>(&self, rhs: F, x0: [f64; N], mut observer: O) -> Result<StepOutcome<N>>
    where
        F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
        O: FnMut(usize, f64, &[f64; N]),
    {
        if let Some(g) = self.guard {
            if g >= N {
                return Err(invalid(format!("guard index {g} out of range for a {N}-dimensional state")));
            }
            if !(x0[g] > 0.0) {
                return Err(invalid(format!("initial state violates the positivity guard: x0[{g}] = {}", x0[g])));
            }
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("initial state is not finite"));
        }
        let (n_steps, dt) = self.spec.steps();
        let mut x = x0;
        let mut t_end = self.t0;
        let mut domain_exit = None;
        observer(0, self.t0, &x);
        for i in 0..n_steps {
            let t = self.t0 + i as f64 * dt;
            let next = match rk4_step(&rhs, t, &x, dt) {
                Ok(next) => next,
                Err(Error::Domain { gamma }) => {
                    domain_exit = Some(DomainExit { t, last_state: x.to_vec(), rejected_value: Some(gamma) });
                    break;
                }
                Err(e) => return Err(e),
            };
            let t_next = self.t0 + (i + 1) as f64 * dt;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Blowup { t: t_next });
            }
            if let Some(g) = self.guard {
                if !(next[g] > 0.0) {
                    domain_exit = Some(DomainExit { t, last_state: x.to_vec(), rejected_value: Some(next[g]) });
                    break;
                }
            }
            x = next;
            t_end = t_next;
            observer(i + 1, t_next, &x);
        }
        Ok(StepOutcome { final_state: x, t_end, domain_exit })
    }

    /// Final state only, without storing samples. A domain exit is an error.
    pub fn final_state<const N: usize, F>(&self, rhs: F, x0: [f64; N]) -> Result<[f64; N]>
    where
        F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let outcome = self.drive(rhs, x0, |_, _, _| {})?;
        match outcome.domain_exit {
            Some(exit) => Err(Error::Domain { gamma: exit.rejected_value.unwrap_or(f64::NAN) }),
            None => Ok(outcome.final_state),
        }
    }
}

/// Result of [`Integrator::drive`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<const N: usize> {
    pub final_state: [f64; N],
    pub t_end: f64,
    pub domain_exit: Option<DomainExit>,
}

fn axpy<const N: usize>(x: &[f64; N], h: f64, k: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|j| x[j] + h * k[j])
}

/// One classical RK4 step.
pub fn rk4_step<const N: usize, F>(rhs: &F, t: f64, x: &[f64; N], dt: f64) -> Result<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let half = 0.5 * dt;
    let k1 = rhs(t, x)?;
    let k2 = rhs(t + half, &axpy(x, half, &k1))?;
    let k3 = rhs(t + half, &axpy(x, half, &k2))?;
    let k4 = rhs(t + dt, &axpy(x, dt, &k3))?;
    Ok(std::array::from_fn(|j| x[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])))
}

/// `integrate(rhs, x0, spec, guard)`.
pub fn integrate<const N: usize, F>(rhs: F, x0: [f64; N], spec: &IntegrationSpec, guard: Option<usize>) -> Result<Trajectory>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    Integrator::new(*spec)?.with_guard(guard).run(rhs, x0)
}

/// Observed convergence order from runs at `dt`, `dt/2` and `dt/4`:
/// `log2(|x_dt − x_{dt/2}| / |x_{dt/2} − x_{dt/4}|)` on the final state.
pub fn step_convergence_order<const N: usize, F>(integrator: &Integrator, rhs: F, x0: [f64; N]) -> Result<f64>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let run = |div: f64| {
        let mut spec = integrator.spec;
        spec.dt /= div;
        Integrator { spec, t0: integrator.t0, guard: integrator.guard }.final_state(&rhs, x0)
    };
    let (x1, x2, x4) = (run(1.0)?, run(2.0)?, run(4.0)?);
    let dist = |a: &[f64; N], b: &[f64; N]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    Ok((dist(&x1, &x2) / dist(&x2, &x4)).log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, x: &[f64; 1]) -> Result<[f64; 1]> {
        Ok([-2.0 * x[0]])
    }

    #[test]
    fn linear_decay_matches_exponential() {
        let spec = IntegrationSpec { dt: 1e-3, t_final: 5.0, record_every: 100 };
        let traj = integrate(decay, [1.0], &spec, None).unwrap();
        let exact = (-10f64).exp();
        assert!(((traj.final_state[0] - exact) / exact).abs() < 1e-8);
        assert_eq!(traj.len(), 51);
        assert!((traj.time(50) - 5.0).abs() < 1e-12);
        assert!(traj.domain_exit.is_none());
    }

    #[test]
    fn step_is_shrunk_to_hit_final_time() {
        let spec = IntegrationSpec { dt: 0.3, t_final: 1.0, record_every: 1 };
        let (n, dt) = spec.steps();
        assert_eq!(n, 4);
        assert_eq!(dt, 0.25);
        assert_eq!(IntegrationSpec { dt: 0.25, ..spec }.steps(), (4, 0.25));
    }

    #[test]
    fn guard_halts_before_crossing() {
        // Γ̇ = −10 pushes through zero quickly.
        let spec = IntegrationSpec { dt: 1e-3, t_final: 1.0, record_every: 1 };
        let rhs = |_t: f64, x: &[f64; 2]| -> Result<[f64; 2]> {
            if x[1] <= 0.0 {
                return Err(Error::Domain { gamma: x[1] });
            }
            Ok([0.0, -10.0])
        };
        let traj = integrate(rhs, [0.0, 1e-9 + 0.05], &spec, Some(1)).unwrap();
        let exit = traj.domain_exit.as_ref().expect("domain exit");
        assert!(exit.last_state[1] > 0.0);
        assert!(traj.component(1).all(|g| g > 0.0));
        assert!(exit.t < 0.006);
    }

    #[test]
    fn rejects_bad_initial_state() {
        let spec = IntegrationSpec { dt: 1e-3, t_final: 1.0, record_every: 1 };
        let rhs = |_t: f64, _x: &[f64; 2]| -> Result<[f64; 2]> { Ok([0.0, 0.0]) };
        assert!(integrate(rhs, [0.0, -1.0], &spec, Some(1)).is_err());
        assert!(integrate(rhs, [0.0, 1.0], &spec, Some(2)).is_err());
    }

    #[test]
    fn blowup_is_reported_with_time() {
        let spec = IntegrationSpec { dt: 1e-2, t_final: 10.0, record_every: 1 };
        let err = integrate(|_t, x: &[f64; 1]| Ok([x[0] * x[0]]), [1.0], &spec, None).unwrap_err();
        match err {
            Error::Blowup { t } => assert!(t > 0.9 && t < 1.2, "{t}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic() {
        let spec = IntegrationSpec { dt: 1e-2, t_final: 3.0, record_every: 7 };
        let rhs = |t: f64, x: &[f64; 2]| Ok([x[1], -x[0] + (3.0 * t).sin()]);
        let a = integrate(rhs, [0.3, -0.1], &spec, None).unwrap();
        let b = integrate(rhs, [0.3, -0.1], &spec, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fourth_order() {
        let it = Integrator::new(IntegrationSpec { dt: 0.05, t_final: 2.0, record_every: 1000 }).unwrap();
        let order = step_convergence_order(&it, |_t, x: &[f64; 2]| Ok([x[1], -x[0] - 0.1 * x[1] * x[1]]), [1.0, 0.0]).unwrap();
        assert!((3.7..=4.3).contains(&order), "{order}");
    }

    #[test]
    fn dither_resolution_enforced() {
        let it = Integrator::new(IntegrationSpec { dt: 0.01, t_final: 1.0, record_every: 1 }).unwrap();
        assert!(it.clone().resolving_dither(10.0).is_ok());
        assert!(it.resolving_dither(100.0).is_err());
        let spec = IntegrationSpec::for_dither(10.0, 1.0, 1);
        assert!((spec.dt - std::f64::consts::PI / 1000.0).abs() < 1e-15);
    }

    #[test]
    fn outputs_recorded_alongside() {
        let spec = IntegrationSpec { dt: 0.1, t_final: 1.0, record_every: 2 };
        let traj = Integrator::new(spec).unwrap().run_with_output(decay, [1.0], |t, x| t + x[0]).unwrap();
        let ys = traj.outputs().unwrap();
        assert_eq!(ys.len(), traj.len());
        for (i, (t, x)) in traj.samples().enumerate() {
            assert!((ys[i] - (t + x[0])).abs() < 1e-15);
        }
    }

    #[test]
    fn averaged_nesc_settles_at_equilibrium() {
        use crate::dynamics::{EscParams, NescSystem};
        use crate::quadrature::PeriodicRule;
        use crate::scalar_maps::builtin_map;
        let params = EscParams::new(0.5, 10.0, 0.1, 0.1).unwrap();
        let sys = NescSystem::new(builtin_map("paper-example").unwrap(), params, PeriodicRule::default()).unwrap();
        let err = sys.clone().with_equilibrium(1e-14).unwrap();
        let spec = IntegrationSpec { dt: 0.05, t_final: 600.0, record_every: 100 };
        let traj = integrate(|_t, x: &[f64; 2]| sys.avg_rhs(*x), [1.0, 5.0 / 6.0], &spec, Some(1)).unwrap();
        assert!(traj.domain_exit.is_none());
        assert!((traj.final_state[0] - err.theta_bar_star()).abs() < 1e-6, "{:?} {:?}", traj.final_state, err.equilibrium());
        assert!((traj.final_state[1] - err.gamma_star()).abs() < 1e-6);
    }
}
