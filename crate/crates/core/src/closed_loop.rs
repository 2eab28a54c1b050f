//! The example plant in closed loop with its observer-based compensator.
//!
//! State layout: `[x₁, x₂, x₃, x̂₁, x̂₂, x̂₃, d̂, r_f]`, where `r_f` is the
//! low-pass filtered reference. The compensator's virtual-output input is
//! selected by [`FeedbackSource`]; a demodulated feed is a sampled signal,
//! refreshed at each grid point and held over the following step.

use crate::control::{ControllerObserver, InjectedControlLaw};
use crate::demod::{Carrier, DemodConfig, DemodError, Demodulator, Estimator};
use crate::plant::{second_virtual_output, virtual_output, ExamplePlant, Plant, Schedule};
use crate::scalar::Scalar;
use crate::signal::{PeriodicSignal, Waveform};
use crate::sim::{Dynamics, Probe, Stage, TimeGrid};

pub const DIM: usize = 8;
pub const PLANT: std::ops::Range<usize> = 0..3;
pub const ETA: std::ops::Range<usize> = 3..7;
pub const REF: usize = 7;

/// Probe columns recorded by [`ExampleLoop`], in order.
pub const PROBES: [&str; 5] = ["ybar_hat", "yv_hat", "yv_fed", "x1_ref", "d"];

/// What drives the observer's `y_v` input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeedbackSource {
    /// The demodulated estimate of the virtual output.
    Demodulated,
    /// The true `x₁`, unavailable in practice.
    TrueState,
    /// `L_g h(x) − ε L_g² h(x) S(t/ε)`, which equals `L_g h` of the averaged
    /// state up to `O(ε²)`; exactly `L_g h(x)` when injection is off.
    IdealVirtualOutput,
}

/// Ramp reference filtered by a unity-gain first-order low-pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceProfile<T> {
    /// Reference value before the ramp starts; also the filter's initial state.
    pub base: T,
    pub start: T,
    pub slope: T,
    pub bandwidth_hz: T,
}

impl<T: Scalar> ReferenceProfile<T> {
    pub fn constant(base: T) -> Self {
        Self { base, start: T::infinity(), slope: T::zero(), bandwidth_hz: T::one() }
    }

    /// Unfiltered reference.
    pub fn raw(&self, t: T) -> T {
        if t > self.start {
            self.base + self.slope * (t - self.start)
        } else {
            self.base
        }
    }

    /// `1 / (2π·bandwidth)`.
    pub fn time_constant(&self) -> T {
        T::one() / (T::TAU() * self.bandwidth_hz)
    }
}

/// Everything needed to build an [`ExampleLoop`].
#[derive(Debug, Clone)]
pub struct LoopSpec<T, W = PeriodicSignal<T>> {
    pub gains: ControllerObserver<T>,
    pub signal: W,
    pub epsilon: T,
    /// When false the loop runs without `s(t/ε)` on the input.
    pub inject: bool,
    pub disturbance: Schedule<T>,
    pub reference: ReferenceProfile<T>,
    pub feedback: FeedbackSource,
    pub estimator: Estimator,
    pub n_periods: usize,
    pub h_step: T,
    /// Run a demodulator even when it does not feed the loop.
    pub monitor_estimates: bool,
    /// Additive measurement noise, one value per grid point.
    pub measurement_noise: Option<Vec<T>>,
}

impl<T: Scalar> LoopSpec<T> {
    /// The worked example: square injection `A = 1`, `ε = 10⁻³`, `n = 10`,
    /// step `ε/100`, demodulated feedback, no events.
    pub fn example() -> Self {
        Self {
            gains: ControllerObserver::example(),
            signal: PeriodicSignal::square(T::one()),
            epsilon: T::lit(1e-3),
            inject: true,
            disturbance: Schedule::constant(T::zero()),
            reference: ReferenceProfile::constant(T::zero()),
            feedback: FeedbackSource::Demodulated,
            estimator: Estimator::DelayedResidual,
            n_periods: 10,
            h_step: T::lit(1e-5),
            monitor_estimates: true,
            measurement_noise: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExampleLoop<T, W = PeriodicSignal<T>> {
    plant: ExamplePlant<T>,
    law: InjectedControlLaw<T, W>,
    inject: bool,
    reference: ReferenceProfile<T>,
    feedback: FeedbackSource,
    estimator: Estimator,
    demod: Option<Demodulator<T, W>>,
    noise: Option<Vec<T>>,
    h: T,
    held_yv: T,
}

impl<T: Scalar, W: Waveform<T> + Clone> ExampleLoop<T, W> {
    pub fn new(spec: LoopSpec<T, W>) -> Result<Self, LoopError> {
        let law = InjectedControlLaw::new(spec.gains, spec.signal.clone(), spec.epsilon)
            .map_err(|e| LoopError::Config(e.to_string()))?;
        let demod = if spec.feedback == FeedbackSource::Demodulated || spec.monitor_estimates {
            let cfg = DemodConfig::new(spec.epsilon, spec.n_periods, spec.h_step, spec.signal, Carrier::Primitive);
            Some(Demodulator::new(cfg)?)
        } else {
            None
        };
        if !(spec.reference.bandwidth_hz > T::zero()) {
            return Err(LoopError::Config("reference bandwidth must be positive".into()));
        }
        Ok(Self {
            plant: ExamplePlant::new(spec.disturbance),
            law,
            inject: spec.inject,
            reference: spec.reference,
            feedback: spec.feedback,
            estimator: spec.estimator,
            demod,
            noise: spec.measurement_noise,
            h: spec.h_step,
            held_yv: T::zero(),
        })
    }

    pub fn plant(&self) -> &ExamplePlant<T> {
        &self.plant
    }

    pub fn gains(&self) -> &ControllerObserver<T> {
        &self.law.base
    }

    /// Initial state: plant and compensator at rest, filter at the base reference.
    pub fn initial_state(&self) -> [T; DIM] {
        let mut x = [T::zero(); DIM];
        x[REF] = self.reference.base;
        x
    }

    /// Grid matching this loop's step over `[0, t_end]`, aligned to the injection period.
    pub fn grid(&self, t_end: T) -> Result<TimeGrid<T>, crate::sim::SimError> {
        TimeGrid::aligned(T::zero(), t_end, self.h, self.law.epsilon())
    }

    #[inline]
    fn injection_on_step(&self, stage: Stage<T>) -> T {
        if !self.inject {
            return T::zero();
        }
        let eps = self.law.epsilon();
        if self.law.signal.is_piecewise_constant() {
            self.law.signal.eval(stage.interval_mid / eps)
        } else {
            self.law.signal.eval(stage.t / eps)
        }
    }

    #[inline]
    fn fed_virtual_output(&self, t: T, x: &[T]) -> T {
        match self.feedback {
            FeedbackSource::Demodulated => self.held_yv,
            FeedbackSource::TrueState => x[0],
            FeedbackSource::IdealVirtualOutput => {
                let plant_x = &x[PLANT];
                let lgh = virtual_output(&self.plant, plant_x);
                if self.inject {
                    let eps = self.law.epsilon();
                    lgh - eps * second_virtual_output(&self.plant, plant_x) * self.law.signal.primitive(t / eps)
                } else {
                    lgh
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoopError {
    #[error("invalid loop configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Demod(#[from] DemodError),
}

impl<T: Scalar, W: Waveform<T> + Clone> Dynamics<T> for ExampleLoop<T, W> {
    fn dim(&self) -> usize {
        DIM
    }

    fn derivative(&self, stage: Stage<T>, x: &[T], dx: &mut [T]) {
        let yv = self.fed_virtual_output(stage.t, x);
        let r_f = x[REF];
        let (eta, eta_dot) = (&x[ETA], &mut [T::zero(); 4]);
        let u_base = self.law.base.compensator_step(eta, yv, r_f, eta_dot);
        let u = u_base + self.injection_on_step(stage);

        let mut f = [T::zero(); 3];
        let mut g = [T::zero(); 3];
        self.plant.drift(stage.interval_mid, &x[PLANT], &mut f);
        self.plant.input_field(&x[PLANT], &mut g);
        for i in 0..3 {
            dx[i] = f[i] + g[i] * u;
        }
        dx[ETA].copy_from_slice(eta_dot);
        dx[REF] = (self.reference.raw(stage.t) - r_f) / self.reference.time_constant();
    }

    fn observe(&mut self, k: usize, t: T, x: &[T], probe: &mut Probe<T>) {
        let nu = self.noise.as_ref().and_then(|n| n.get(k).copied()).unwrap_or_else(T::zero);
        let y = self.plant.output(&x[PLANT]) + nu;
        let est = match self.demod.as_mut() {
            Some(d) => d.push_sample(t, y).ok().unwrap_or_default(),
            None => Default::default(),
        };
        if self.feedback == FeedbackSource::Demodulated {
            if let Some(v) = est.virtual_output(self.estimator) {
                self.held_yv = v;
            }
        }
        let r_f = x[REF];
        let u_base = self.law.base.control(&x[ETA], r_f);
        let inj = if self.inject {
            let eps = self.law.epsilon();
            self.law.signal.eval_held(t / eps, self.h / eps)
        } else {
            T::zero()
        };
        probe.input = u_base + inj;
        probe.output = y;
        probe.extra.clear();
        probe.extra.push(est.ybar.unwrap_or_else(T::nan));
        probe.extra.push(est.virtual_output(self.estimator).unwrap_or_else(T::nan));
        probe.extra.push(self.fed_virtual_output(t, x));
        probe.extra.push(r_f);
        probe.extra.push(self.plant.disturbance.value_at(t));
    }

    fn probe_names(&self) -> Vec<String> {
        PROBES.iter().map(|s| s.to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::simulate;

    #[test]
    fn rest_stays_at_rest_without_injection() {
        let spec = LoopSpec { inject: false, feedback: FeedbackSource::TrueState, ..LoopSpec::<f64>::example() };
        let mut lp = ExampleLoop::new(spec).unwrap();
        let grid = TimeGrid::new(0.0, 0.05, 1e-5).unwrap();
        let x0 = lp.initial_state();
        let traj = simulate(&mut lp, &grid, &x0).unwrap();
        assert!(traj.final_state().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reference_filter_is_first_order() {
        let r = ReferenceProfile { base: 0.0, start: 1.0, slope: 1.0, bandwidth_hz: 1.0 };
        assert_eq!(r.raw(0.5), 0.0);
        assert_eq!(r.raw(3.0), 2.0);
        assert!((r.time_constant() - 1.0 / std::f64::consts::TAU).abs() < 1e-15);
    }

    #[test]
    fn true_state_feedback_regulates_disturbance() {
        let spec = LoopSpec {
            feedback: FeedbackSource::TrueState,
            disturbance: Schedule::new(0.0, vec![(0.5, -2.0)]),
            h_step: 1e-4,
            epsilon: 4e-3,
            monitor_estimates: false,
            ..LoopSpec::<f64>::example()
        };
        let mut lp = ExampleLoop::new(spec).unwrap();
        let grid = lp.grid(30.0).unwrap();
        let x0 = lp.initial_state();
        let traj = simulate(&mut lp, &grid, &x0).unwrap();
        let xf = traj.final_state();
        assert!(xf[0].abs() < 1e-3, "{xf:?}");
        assert!((xf[6] + 2.0).abs() < 1e-3, "d̂ → d: {xf:?}");
    }
}
