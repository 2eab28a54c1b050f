//! Scenario files: flat TOML key-value text, validated before anything runs.

use std::path::Path;

use hfi_core::closed_loop::{FeedbackSource, LoopSpec, ReferenceProfile};
use hfi_core::control::ControllerObserver;
use hfi_core::demod::Estimator;
use hfi_core::noise::NoiseSpec;
use hfi_core::plant::Schedule;
use hfi_core::scalar::integer_ratio;
use hfi_core::signal::{PeriodicSignal, Shape};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

fn field(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeName {
    Square,
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackName {
    DemodYv,
    TrueX1,
    IdealLgh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    DelayedResidual,
    Simple,
}

fn default_n() -> usize {
    10
}
fn default_stride() -> usize {
    1
}
fn default_bandwidth() -> f64 {
    1.0
}
fn default_h_ratio() -> usize {
    100
}
fn default_feedback() -> FeedbackName {
    FeedbackName::DemodYv
}
fn default_estimator() -> EstimatorName {
    EstimatorName::DelayedResidual
}
fn default_shape() -> ShapeName {
    ShapeName::Square
}
fn default_one() -> f64 {
    1.0
}

/// One experiment definition. Every key is top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub epsilon: f64,
    #[serde(default = "default_shape")]
    pub shape: ShapeName,
    #[serde(default = "default_one")]
    pub amplitude: f64,
    /// Fraction of a period by which the waveform is advanced.
    #[serde(default)]
    pub phase: Option<f64>,
    #[serde(default = "default_n")]
    pub n_periods: usize,
    pub h_step: f64,
    pub t_end: f64,
    /// `[[time, value], ...]`; the disturbance is zero before the first entry.
    #[serde(default)]
    pub disturbance: Vec<[f64; 2]>,
    #[serde(default)]
    pub ref_initial: f64,
    #[serde(default)]
    pub ref_start: Option<f64>,
    #[serde(default)]
    pub ref_slope: f64,
    #[serde(default = "default_bandwidth")]
    pub ref_bandwidth_hz: f64,
    #[serde(default = "default_feedback")]
    pub feedback: FeedbackName,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorName,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub noise_sample_time: Option<f64>,
    #[serde(default)]
    pub noise_power: Option<f64>,
    #[serde(default)]
    pub noise_seed: u64,
    /// Levels for `sweep`; the step is `ε / h_ratio` at each level.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_h_ratio")]
    pub h_ratio: usize,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// The worked example: square wave `A = 1` at 1 kHz, `n = 10`, `h = 10⁻⁵`,
    /// a −2 disturbance step at 2 s and a unit ramp from 14 s through a 1 Hz filter.
    pub fn paper() -> Self {
        Self {
            epsilon: 1e-3,
            shape: ShapeName::Square,
            amplitude: 1.0,
            phase: None,
            n_periods: 10,
            h_step: 1e-5,
            t_end: 20.0,
            disturbance: vec![[2.0, -2.0]],
            ref_initial: 0.0,
            ref_start: Some(14.0),
            ref_slope: 1.0,
            ref_bandwidth_hz: 1.0,
            feedback: FeedbackName::DemodYv,
            estimator: EstimatorName::DelayedResidual,
            stride: 100,
            noise_sample_time: None,
            noise_power: None,
            noise_seed: 0,
            epsilons: vec![4e-3, 2e-3, 1e-3],
            h_ratio: 100,
        }
    }

    /// Checks every invariant, naming the first offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(field(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("h_step", self.h_step)?;
        positive("t_end", self.t_end)?;
        positive("ref_bandwidth_hz", self.ref_bandwidth_hz)?;
        if !self.amplitude.is_finite() {
            return Err(field("amplitude", "must be finite"));
        }
        if let Some(p) = self.phase {
            if !(0.0..1.0).contains(&p) {
                return Err(field("phase", format!("must lie in [0, 1), got {p}")));
            }
        }
        if self.n_periods == 0 {
            return Err(field("n_periods", "must be at least 1"));
        }
        if self.stride == 0 {
            return Err(field("stride", "must be at least 1"));
        }
        if integer_ratio(self.epsilon / 4.0, self.h_step).is_none() {
            return Err(field("h_step", format!("{} does not divide epsilon/4 = {}", self.h_step, self.epsilon / 4.0)));
        }
        if integer_ratio(self.t_end, self.h_step).is_none() {
            return Err(field("t_end", format!("{} is not a whole number of steps of {}", self.t_end, self.h_step)));
        }
        for [t, v] in &self.disturbance {
            if !(0.0..=self.t_end).contains(t) || !v.is_finite() {
                return Err(field("disturbance", format!("event ({t}, {v}) must be finite and within [0, t_end]")));
            }
            if integer_ratio(*t, self.h_step).is_none() && *t != 0.0 {
                return Err(field("disturbance", format!("event time {t} is not on the integration grid")));
            }
        }
        if let Some(t) = self.ref_start {
            if !(0.0..=self.t_end).contains(&t) {
                return Err(field("ref_start", format!("{t} must lie within [0, t_end]")));
            }
        }
        if !self.ref_slope.is_finite() || !self.ref_initial.is_finite() {
            return Err(field("ref_slope", "reference values must be finite"));
        }
        match (self.noise_sample_time, self.noise_power) {
            (None, None) => {}
            (Some(ts), Some(p)) => {
                NoiseSpec::new(ts, p, self.noise_seed).map_err(|e| field("noise_sample_time", e.to_string()))?;
                if integer_ratio(ts, self.h_step).is_none() {
                    return Err(field("noise_sample_time", format!("h_step {} does not divide {ts}", self.h_step)));
                }
            }
            (Some(_), None) => return Err(field("noise_power", "required when noise_sample_time is set")),
            (None, Some(_)) => return Err(field("noise_sample_time", "required when noise_power is set")),
        }
        if self.h_ratio == 0 || !self.h_ratio.is_multiple_of(4) {
            return Err(field("h_ratio", format!("must be a positive multiple of 4, got {}", self.h_ratio)));
        }
        for (i, e) in self.epsilons.iter().enumerate() {
            if !(*e > 0.0 && e.is_finite()) {
                return Err(field("epsilons", format!("level {e} must be positive")));
            }
            if self.epsilons[..i].iter().any(|p| (p - e).abs() <= 1e-12 * e) {
                return Err(field("epsilons", format!("duplicate level {e}")));
            }
            if integer_ratio(self.t_end, e / self.h_ratio as f64).is_none() {
                return Err(field("epsilons", format!("t_end is not a whole number of steps at level {e}")));
            }
        }
        Ok(())
    }

    pub fn signal(&self) -> PeriodicSignal<f64> {
        let shape = match self.shape {
            ShapeName::Square => Shape::Square,
            ShapeName::Sine => Shape::Sine,
        };
        match self.phase {
            Some(p) => PeriodicSignal::with_phase(shape, self.amplitude, p).expect("phase validated"),
            None => PeriodicSignal::new(shape, self.amplitude),
        }
    }

    pub fn noise(&self) -> Option<NoiseSpec> {
        match (self.noise_sample_time, self.noise_power) {
            (Some(ts), Some(p)) => NoiseSpec::new(ts, p, self.noise_seed).ok(),
            _ => None,
        }
    }

    pub fn feedback_source(&self) -> FeedbackSource {
        match self.feedback {
            FeedbackName::DemodYv => FeedbackSource::Demodulated,
            FeedbackName::TrueX1 => FeedbackSource::TrueState,
            FeedbackName::IdealLgh => FeedbackSource::IdealVirtualOutput,
        }
    }

    pub fn estimator_kind(&self) -> Estimator {
        match self.estimator {
            EstimatorName::DelayedResidual => Estimator::DelayedResidual,
            EstimatorName::Simple => Estimator::Simple,
        }
    }

    pub fn reference(&self) -> ReferenceProfile<f64> {
        ReferenceProfile {
            base: self.ref_initial,
            start: self.ref_start.unwrap_or(f64::INFINITY),
            slope: self.ref_slope,
            bandwidth_hz: self.ref_bandwidth_hz,
        }
    }

    pub fn disturbance_schedule(&self) -> Schedule<f64> {
        Schedule::new(0.0, self.disturbance.iter().map(|[t, v]| (*t, *v)).collect())
    }

    /// Loop description without measurement noise.
    pub fn loop_spec(&self) -> LoopSpec<f64> {
        LoopSpec {
            gains: ControllerObserver::example(),
            signal: self.signal(),
            epsilon: self.epsilon,
            inject: true,
            disturbance: self.disturbance_schedule(),
            reference: self.reference(),
            feedback: self.feedback_source(),
            estimator: self.estimator_kind(),
            n_periods: self.n_periods,
            h_step: self.h_step,
            monitor_estimates: true,
            measurement_noise: None,
        }
    }

    /// The same scenario at another injection period, with the step rescaled by `h_ratio`.
    pub fn at_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, h_step: epsilon / self.h_ratio as f64, ..self.clone() }
    }
}
