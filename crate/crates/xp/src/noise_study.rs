//! Estimator variance under band-limited white noise, and the noisy closed loop.

use hfi_core::demod::{Carrier, DemodConfig};
use hfi_core::noise::{
    measure_estimator_noise, predicted_ybar_variance, predicted_yv_simple_variance, NoiseError, NoiseSpec,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::Scenario;
use crate::scenario::{run_scenario, Metrics, RunError, RunResult};

#[derive(Debug, Error)]
pub enum NoiseStudyError {
    #[error("invalid `{field}`: {message}")]
    Field { field: &'static str, message: String },
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Run(#[from] RunError),
}

/// One estimator-only measurement against its prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseCase {
    pub label: String,
    pub n_periods: usize,
    pub amplitude: f64,
    pub var_ybar: f64,
    pub predicted_var_ybar: f64,
    pub var_yv_simple: f64,
    pub predicted_var_yv_simple: f64,
    pub var_yv: f64,
    pub carrier_sq_mean: f64,
}

impl NoiseCase {
    pub fn ybar_ratio(&self) -> f64 {
        self.var_ybar / self.predicted_var_ybar
    }

    pub fn yv_simple_ratio(&self) -> f64 {
        self.var_yv_simple / self.predicted_var_yv_simple
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseStudy {
    pub sigma: f64,
    pub duration: f64,
    pub base: NoiseCase,
    pub doubled_n: NoiseCase,
    pub doubled_amplitude: NoiseCase,
    pub closed_loop: Metrics,
}

fn measure(
    sc: &Scenario,
    spec: &NoiseSpec,
    n: usize,
    amplitude: f64,
    duration: f64,
    label: &str,
) -> Result<NoiseCase, NoiseStudyError> {
    let signal = Scenario { amplitude, ..sc.clone() }.signal();
    let cfg = DemodConfig::new(sc.epsilon, n, sc.h_step, signal, Carrier::Primitive);
    let m = measure_estimator_noise(&cfg, spec, duration)?;
    Ok(NoiseCase {
        label: label.into(),
        n_periods: n,
        amplitude,
        var_ybar: m.var_ybar,
        predicted_var_ybar: predicted_ybar_variance(spec, n, sc.epsilon),
        var_yv_simple: m.var_yv_simple,
        predicted_var_yv_simple: predicted_yv_simple_variance(spec, n, sc.epsilon, m.carrier_sq_mean),
        var_yv: m.var_yv,
        carrier_sq_mean: m.carrier_sq_mean,
    })
}

/// Estimator-only variances for the base case, doubled `n` and doubled `A`,
/// plus the scenario run closed loop with the same noise. Returns the noisy
/// run's columns alongside the study.
pub fn run_noise_study(sc: &Scenario) -> Result<(NoiseStudy, RunResult), NoiseStudyError> {
    let spec = sc.noise().ok_or(NoiseStudyError::Field {
        field: "noise_sample_time",
        message: "the noise study needs noise_sample_time and noise_power".into(),
    })?;
    let duration = 1000.0 * 2.0 * sc.n_periods as f64 * sc.epsilon;
    let base = measure(sc, &spec, sc.n_periods, sc.amplitude, duration, "base")?;
    let doubled_n = measure(sc, &spec, 2 * sc.n_periods, sc.amplitude, duration, "doubled_n")?;
    let doubled_amplitude = measure(sc, &spec, sc.n_periods, 2.0 * sc.amplitude, duration, "doubled_amplitude")?;
    let run = run_scenario(sc)?;
    let study = NoiseStudy {
        sigma: spec.sigma(),
        duration,
        base,
        doubled_n,
        doubled_amplitude,
        closed_loop: run.metrics.clone(),
    };
    Ok((study, run))
}
