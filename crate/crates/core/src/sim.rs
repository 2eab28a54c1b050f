//! Fixed-step RK4 integration and dense trajectory recording.
//!
//! Right-hand sides may be piecewise smooth in time provided every
//! discontinuity falls on a step boundary. Each stage receives both its own
//! time and the midpoint of the enclosing step, so a piecewise-constant input
//! can be evaluated on the open step interval and never on a switch instant.

use thiserror::Error;

use crate::scalar::{integer_ratio, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("non-finite derivative at t = {t}: component {component}")]
    NonFiniteDerivative { t: f64, component: usize },
    #[error("non-finite state at t = {t}: component {component}")]
    NonFiniteState { t: f64, component: usize },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("state has length {got}, system dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Time at which a right-hand side is evaluated inside one RK4 step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage<T> {
    /// Stage time: `t`, `t + h/2` or `t + h`.
    pub t: T,
    /// Midpoint of the step `[t, t + h]` the stage belongs to.
    pub interval_mid: T,
}

impl<T: Scalar> Stage<T> {
    pub fn at(t: T) -> Self {
        Self { t, interval_mid: t }
    }
}

/// Uniform grid `t0, t0 + h, …, t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    t0: T,
    h: T,
    steps: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(t0: T, t_end: T, h: T) -> Result<Self, SimError> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(SimError::InvalidGrid(format!("step {h} must be positive")));
        }
        if !(t_end > t0) {
            return Err(SimError::InvalidGrid(format!("t_end {t_end} must exceed t0 {t0}")));
        }
        let steps = integer_ratio(t_end - t0, h).ok_or_else(|| {
            SimError::InvalidGrid(format!("span {} is not an integer multiple of step {h}", t_end - t0))
        })?;
        Ok(Self { t0, h, steps })
    }

    /// Grid whose step also divides a quarter of `period`, so that a square wave
    /// of that period switches only on step boundaries.
    pub fn aligned(t0: T, t_end: T, h: T, period: T) -> Result<Self, SimError> {
        let grid = Self::new(t0, t_end, h)?;
        if integer_ratio(period / T::lit(4.0), h).is_none() {
            return Err(SimError::InvalidGrid(format!("step {h} does not divide a quarter of period {period}")));
        }
        Ok(grid)
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn step(&self) -> T {
        self.h
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_end(&self) -> T {
        self.time(self.steps)
    }

    /// Grid time of sample `k`, computed without accumulation.
    #[inline]
    pub fn time(&self, k: usize) -> T {
        self.t0 + T::from_usize_lossy(k) * self.h
    }

    /// Index of the grid point nearest to `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: T) -> Option<usize> {
        if t < self.t0 {
            return None;
        }
        let r = ((t - self.t0) / self.h).round();
        let k = r.to_usize()?;
        let tol = self.h * T::lit(1e-6);
        (k <= self.steps && (self.time(k) - t).abs() <= tol).then_some(k)
    }
}

/// Reusable RK4 workspace.
#[derive(Debug, Clone)]
pub struct Rk4<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Scalar> Rk4<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![T::zero(); dim],
            k2: vec![T::zero(); dim],
            k3: vec![T::zero(); dim],
            k4: vec![T::zero(); dim],
            tmp: vec![T::zero(); dim],
        }
    }

    /// Advances `x` in place by one classical RK4 step of size `h` from `t`.
    pub fn step<F>(&mut self, mut rhs: F, t: T, x: &mut [T], h: T) -> Result<(), SimError>
    where
        F: FnMut(Stage<T>, &[T], &mut [T]),
    {
        let n = self.k1.len();
        if x.len() != n {
            return Err(SimError::DimensionMismatch { expected: n, got: x.len() });
        }
        let half = h / T::lit(2.0);
        let mid = t + half;
        let end = t + h;

        rhs(Stage { t, interval_mid: mid }, x, &mut self.k1);
        check_finite(&self.k1, t)?;
        for i in 0..n {
            self.tmp[i] = x[i] + half * self.k1[i];
        }
        rhs(Stage { t: mid, interval_mid: mid }, &self.tmp, &mut self.k2);
        check_finite(&self.k2, mid)?;
        for i in 0..n {
            self.tmp[i] = x[i] + half * self.k2[i];
        }
        rhs(Stage { t: mid, interval_mid: mid }, &self.tmp, &mut self.k3);
        check_finite(&self.k3, mid)?;
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        rhs(Stage { t: end, interval_mid: mid }, &self.tmp, &mut self.k4);
        check_finite(&self.k4, end)?;

        let sixth = h / T::lit(6.0);
        let two = T::lit(2.0);
        for i in 0..n {
            x[i] += sixth * (self.k1[i] + two * self.k2[i] + two * self.k3[i] + self.k4[i]);
            if !x[i].is_finite() {
                return Err(SimError::NonFiniteState { t: end.as_f64(), component: i });
            }
        }
        Ok(())
    }
}

fn check_finite<T: Scalar>(dx: &[T], t: T) -> Result<(), SimError> {
    match dx.iter().position(|v| !v.is_finite()) {
        Some(component) => Err(SimError::NonFiniteDerivative { t: t.as_f64(), component }),
        None => Ok(()),
    }
}

/// One classical RK4 step, allocating a fresh state.
pub fn rk4_step<T, F>(rhs: F, t: T, x: &[T], h: T) -> Result<Vec<T>, SimError>
where
    T: Scalar,
    F: FnMut(Stage<T>, &[T], &mut [T]),
{
    if !(h > T::zero()) {
        return Err(SimError::InvalidGrid(format!("step {h} must be positive")));
    }
    let mut out = x.to_vec();
    Rk4::new(x.len()).step(rhs, t, &mut out, h)?;
    Ok(out)
}

/// Values recorded at a grid point besides the state.
#[derive(Debug, Clone, Default)]
pub struct Probe<T> {
    pub input: T,
    pub output: T,
    pub extra: Vec<T>,
}

/// A continuous-time system, optionally with discrete-time internals that are
/// updated once per grid point (sampled estimators, held feeds).
pub trait Dynamics<T: Scalar> {
    fn dim(&self) -> usize;

    fn derivative(&self, stage: Stage<T>, x: &[T], dx: &mut [T]);

    /// Called at grid point `k` before the step leaving it. Fills `probe` and
    /// may update discrete state consumed by the following step.
    fn observe(&mut self, k: usize, t: T, x: &[T], probe: &mut Probe<T>) {
        let _ = (k, t, x, probe);
    }

    /// Names of `Probe::extra` entries, in order.
    fn probe_names(&self) -> Vec<String> {
        Vec::new()
    }
}

/// Adapts a bare right-hand side to [`Dynamics`].
pub struct OdeFn<F> {
    dim: usize,
    rhs: F,
}

impl<F> OdeFn<F> {
    pub fn new(dim: usize, rhs: F) -> Self {
        Self { dim, rhs }
    }
}

impl<T, F> Dynamics<T> for OdeFn<F>
where
    T: Scalar,
    F: Fn(Stage<T>, &[T], &mut [T]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn derivative(&self, stage: Stage<T>, x: &[T], dx: &mut [T]) {
        (self.rhs)(stage, x, dx)
    }
}

/// Dense record of a simulation, one entry per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub inputs: Vec<T>,
    pub outputs: Vec<T>,
    dim: usize,
    states: Vec<T>,
    probe_names: Vec<String>,
    probes: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    fn with_capacity(dim: usize, probe_names: Vec<String>, n: usize) -> Self {
        let width = probe_names.len();
        Self {
            times: Vec::with_capacity(n),
            inputs: Vec::with_capacity(n),
            outputs: Vec::with_capacity(n),
            dim,
            states: Vec::with_capacity(n * dim),
            probe_names,
            probes: Vec::with_capacity(n * width),
        }
    }

    fn push(&mut self, t: T, x: &[T], probe: &Probe<T>) {
        self.times.push(t);
        self.states.extend_from_slice(x);
        self.inputs.push(probe.input);
        self.outputs.push(probe.output);
        let width = self.probe_names.len();
        let extra = &probe.extra;
        for i in 0..width {
            self.probes.push(extra.get(i).copied().unwrap_or_else(T::nan));
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, k: usize) -> &[T] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[T]> {
        self.states.chunks_exact(self.dim.max(1))
    }

    pub fn final_state(&self) -> &[T] {
        self.state(self.len() - 1)
    }

    /// Time series of state component `i`.
    pub fn component(&self, i: usize) -> Vec<T> {
        self.states().map(|x| x[i]).collect()
    }

    pub fn probe_names(&self) -> &[String] {
        &self.probe_names
    }

    /// Time series of a named probe.
    pub fn probe(&self, name: &str) -> Option<Vec<T>> {
        let width = self.probe_names.len();
        let j = self.probe_names.iter().position(|p| p == name)?;
        Some(self.probes.iter().skip(j).step_by(width).copied().collect())
    }
}

/// Integrates `sys` over `grid` from `x0`, observing at every grid point.
pub fn simulate<T, D>(sys: &mut D, grid: &TimeGrid<T>, x0: &[T]) -> Result<Trajectory<T>, SimError>
where
    T: Scalar,
    D: Dynamics<T> + ?Sized,
{
    let dim = sys.dim();
    if x0.len() != dim {
        return Err(SimError::DimensionMismatch { expected: dim, got: x0.len() });
    }
    if let Some(component) = x0.iter().position(|v| !v.is_finite()) {
        return Err(SimError::NonFiniteState { t: grid.t0().as_f64(), component });
    }
    let names = sys.probe_names();
    let mut traj = Trajectory::with_capacity(dim, names.clone(), grid.len());
    let mut rk = Rk4::new(dim);
    let mut x = x0.to_vec();
    let mut probe = Probe { input: T::zero(), output: T::zero(), extra: vec![T::zero(); names.len()] };
    let h = grid.step();
    for k in 0..=grid.steps() {
        let t = grid.time(k);
        sys.observe(k, t, &x, &mut probe);
        traj.push(t, &x, &probe);
        if k < grid.steps() {
            let view: &D = sys;
            rk.step(|st, xs, dx| view.derivative(st, xs, dx), t, &mut x, h)?;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let x = rk4_step(|_s: Stage<f64>, _x: &[f64], dx: &mut [f64]| dx.fill(0.0), 0.0, &[1.0, 2.0], 0.1).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn exponential_step_matches_taylor_polynomial() {
        let h = 0.1_f64;
        let x = rk4_step(|_s: Stage<f64>, x: &[f64], dx: &mut [f64]| dx[0] = x[0], 0.0, &[1.0], h).unwrap();
        let taylor = 1.0 + h + h * h / 2.0 + h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((x[0] - taylor).abs() < 1e-15);
        assert!((x[0] - 1.105_170_833_333_333_3).abs() < 1e-15);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn rotation_returns_after_one_turn() {
        let mut x = vec![1.0_f64, 0.0];
        let mut rk = Rk4::new(2);
        let h = 0.01;
        let rot = |_s: Stage<f64>, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -x[0];
        };
        for k in 0..628 {
            rk.step(rot, k as f64 * h, &mut x, h).unwrap();
        }
        // exact rotation by 6.28 rad
        let (c, s) = (6.28_f64.cos(), 6.28_f64.sin());
        assert!((x[0] - c).abs() < 1e-8 && (x[1] + s).abs() < 1e-8, "{x:?}");
        assert!((x[0] - 1.0).abs() < 1e-5 && x[1].abs() < 4e-3);
    }

    #[test]
    fn non_finite_derivative_names_time_and_component() {
        let err = rk4_step(
            |s: Stage<f64>, _x: &[f64], dx: &mut [f64]| {
                dx[0] = 0.0;
                dx[1] = if s.t > 0.0 { f64::NAN } else { 0.0 };
            },
            0.0,
            &[0.0, 0.0],
            0.5,
        )
        .unwrap_err();
        assert_eq!(err, SimError::NonFiniteDerivative { t: 0.25, component: 1 });
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0.0, 1.0, 0.0).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.3).is_err());
        assert!(TimeGrid::new(1.0, 1.0, 0.1).is_err());
        assert!(TimeGrid::aligned(0.0, 1.0, 1e-3, 1e-2).is_err());
        let g = TimeGrid::aligned(0.0, 1.0, 1e-5, 1e-3).unwrap();
        assert_eq!(g.len(), 100_001);
        assert_eq!(g.index_of(0.5), Some(50_000));
        assert_eq!(g.index_of(0.500_005), None);
    }

    #[test]
    fn zero_field_simulation_records_identical_states() {
        let mut sys = OdeFn::new(2, |_s: Stage<f64>, _x: &[f64], dx: &mut [f64]| dx.fill(0.0));
        let grid = TimeGrid::new(0.0, 1.0, 0.1).unwrap();
        let traj = simulate(&mut sys, &grid, &[3.0, -1.0]).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.states().all(|x| x == [3.0, -1.0]));
        assert_eq!(traj.times.len(), traj.inputs.len());
    }

    #[test]
    fn decay_matches_exponential() {
        let mut sys = OdeFn::new(1, |_s: Stage<f64>, x: &[f64], dx: &mut [f64]| dx[0] = -x[0]);
        let grid = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
        let traj = simulate(&mut sys, &grid, &[1.0]).unwrap();
        assert!((traj.final_state()[0] - (-1.0_f64).exp()).abs() < 1e-10);
        assert_eq!(traj.times[1000], 1.0);
    }

    #[test]
    fn works_in_single_precision() {
        let mut sys = OdeFn::new(1, |_s: Stage<f32>, x: &[f32], dx: &mut [f32]| dx[0] = -x[0]);
        let grid = TimeGrid::new(0.0_f32, 1.0, 1e-2).unwrap();
        let traj = simulate(&mut sys, &grid, &[1.0]).unwrap();
        assert!((traj.final_state()[0] - (-1.0_f32).exp()).abs() < 1e-5);
    }
}
