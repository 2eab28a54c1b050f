//! Single closed-loop runs and the summary metrics derived from their columns.

use hfi_core::closed_loop::{ExampleLoop, LoopSpec, ETA, PLANT};
use hfi_core::noise::{generate_noise, NoiseError};
use hfi_core::sim::{simulate, SimError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Scenario;

/// Emitted columns, in order.
pub const COLUMNS: [&str; 13] =
    ["t", "x1", "x2", "x3", "u", "y", "ybar_hat", "yv_hat", "x1_ref", "xh1", "xh2", "xh3", "dh"];

/// Settling band as a fraction of the disturbance step.
pub const SETTLING_FRACTION: f64 = 0.02;

/// Share of the horizon covered by each of the two tracking windows at its end.
pub const TAIL_FRACTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("numerical failure: {0}")]
    Numerical(#[from] SimError),
    #[error("setup failed: {0}")]
    Setup(String),
}

impl From<NoiseError> for RunError {
    fn from(e: NoiseError) -> Self {
        RunError::Setup(e.to_string())
    }
}

/// Named equal-length columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Columns {
    pub names: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl Columns {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.data[i].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    fn col(&self, name: &str) -> &[f64] {
        self.get(name).unwrap_or_else(|| panic!("column {name} missing"))
    }
}

/// Summary of one run. Every entry can be recomputed from the emitted columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Time from the first disturbance step until `|x₁ − x₁ʳᵉᶠ|` last leaves the
    /// settling band before the next event; absent when there is no step or the
    /// error is still outside the band when the next event arrives.
    pub settling_time: Option<f64>,
    pub sup_tracking_error: f64,
    /// `sup |x₁ − x₁ʳᵉᶠ|` over the second-to-last tenth of the horizon.
    pub tracking_error_prior: f64,
    /// The same over the last tenth.
    pub tracking_error_final: f64,
    /// `sup |ŷ_v − x₁|` where the estimate is valid.
    pub sup_yv_error: f64,
    pub final_x1: f64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub columns: Columns,
    pub metrics: Metrics,
}

/// Simulates the scenario and keeps every `stride`-th sample.
pub fn run_scenario(sc: &Scenario) -> Result<RunResult, RunError> {
    sc.validate().map_err(|e| RunError::Setup(e.to_string()))?;
    run_loop(sc, sc.loop_spec())
}

/// Runs an explicit loop description with the scenario's grid, noise and emission settings.
pub fn run_loop(sc: &Scenario, mut spec: LoopSpec<f64>) -> Result<RunResult, RunError> {
    let probe = ExampleLoop::new(spec.clone()).map_err(|e| RunError::Setup(e.to_string()))?;
    let grid = probe.grid(sc.t_end)?;
    if let Some(noise) = sc.noise() {
        spec.measurement_noise = Some(generate_noise(&noise, &grid)?);
    }
    let mut lp = ExampleLoop::new(spec).map_err(|e| RunError::Setup(e.to_string()))?;
    let x0 = lp.initial_state();
    let traj = simulate(&mut lp, &grid, &x0)?;

    let keep: Vec<usize> = (0..traj.len()).step_by(sc.stride).collect();
    let pick = |v: &[f64]| keep.iter().map(|&k| v[k]).collect::<Vec<f64>>();
    let state = |i: usize| keep.iter().map(|&k| traj.state(k)[i]).collect::<Vec<f64>>();
    let probe = |name: &str| pick(&traj.probe(name).expect("loop probe"));
    let data = vec![
        pick(&traj.times),
        state(PLANT.start),
        state(PLANT.start + 1),
        state(PLANT.start + 2),
        pick(&traj.inputs),
        pick(&traj.outputs),
        probe("ybar_hat"),
        probe("yv_hat"),
        probe("x1_ref"),
        state(ETA.start),
        state(ETA.start + 1),
        state(ETA.start + 2),
        state(ETA.start + 3),
    ];
    let columns = Columns { names: COLUMNS.iter().map(|s| s.to_string()).collect(), data };
    let metrics = compute_metrics(&columns, sc);
    Ok(RunResult { columns, metrics })
}

fn sup_over(t: &[f64], v: impl Fn(usize) -> f64, from: f64, to: f64) -> f64 {
    (0..t.len()).filter(|&k| t[k] >= from && t[k] <= to).map(v).fold(0.0, f64::max)
}

/// Derives [`Metrics`] from emitted columns.
pub fn compute_metrics(cols: &Columns, sc: &Scenario) -> Metrics {
    let t = cols.col("t");
    let x1 = cols.col("x1");
    let r = cols.col("x1_ref");
    let yv = cols.col("yv_hat");
    let err = |k: usize| (x1[k] - r[k]).abs();
    let t_end = t.last().copied().unwrap_or(0.0);
    let tail = TAIL_FRACTION * t_end;

    Metrics {
        settling_time: settling_time(t, &err, sc),
        sup_tracking_error: (0..t.len()).map(err).fold(0.0, f64::max),
        tracking_error_prior: sup_over(t, err, t_end - 2.0 * tail, t_end - tail),
        tracking_error_final: sup_over(t, err, t_end - tail, t_end),
        sup_yv_error: (0..t.len()).filter(|&k| !yv[k].is_nan()).map(|k| (yv[k] - x1[k]).abs()).fold(0.0, f64::max),
        final_x1: x1.last().copied().unwrap_or(f64::NAN),
        rows: t.len(),
    }
}

fn settling_time(t: &[f64], err: &impl Fn(usize) -> f64, sc: &Scenario) -> Option<f64> {
    let mut events: Vec<[f64; 2]> = sc.disturbance.clone();
    events.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut prev = 0.0;
    let mut step = None;
    for (i, [te, v]) in events.iter().enumerate() {
        if *v != prev {
            step = Some((i, *te, (*v - prev).abs()));
            break;
        }
        prev = *v;
    }
    let (i, t_d, magnitude) = step?;
    let mut window_end = events.get(i + 1).map_or(f64::INFINITY, |e| e[0]);
    if let Some(rs) = sc.ref_start {
        if rs > t_d {
            window_end = window_end.min(rs);
        }
    }
    let band = SETTLING_FRACTION * magnitude;
    let inside: Vec<usize> = (0..t.len()).filter(|&k| t[k] >= t_d && t[k] < window_end).collect();
    let last_out = inside.iter().rev().find(|&&k| err(k) > band);
    match last_out {
        None => Some(0.0),
        Some(&k) if Some(&k) == inside.last() => None,
        Some(&k) => Some(t[k] - t_d),
    }
}
