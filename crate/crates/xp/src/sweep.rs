//! Order studies across injection periods and window lengths.

use hfi_core::averaging::{fit_order, long_horizon_bound, AveragingError, OrderFit, PairedRun};
use hfi_core::demod::{synthetic_errors, Carrier, DemodConfig, EstimatorErrors};
use hfi_core::signal::PeriodicSignal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::Scenario;

/// Residuals at or below ten times this value are treated as unusable.
pub const INTEGRATOR_FLOOR: f64 = 1e-11;

/// Fraction of the post-transient horizon compared at each end.
pub const HORIZON_WINDOW: f64 = 0.1;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid `{field}`: {message}")]
    Field { field: &'static str, message: String },
    #[error(transparent)]
    Averaging(#[from] AveragingError),
    #[error("estimator run failed: {0}")]
    Demod(String),
}

/// Slow signals used to probe the estimators.
pub fn synthetic_ybar(t: f64) -> f64 {
    t.sin()
}

pub fn synthetic_yv(t: f64) -> f64 {
    (0.7 * t).cos()
}

/// Estimator errors on `y = sin t + ε·cos(0.7t)·s(t/ε)` demodulated against `s`.
pub fn estimator_errors(
    signal: PeriodicSignal<f64>,
    epsilon: f64,
    n_periods: usize,
    h_ratio: usize,
    horizon: f64,
) -> Result<EstimatorErrors<f64>, StudyError> {
    let cfg = DemodConfig::new(epsilon, n_periods, epsilon / h_ratio as f64, signal, Carrier::Signal);
    synthetic_errors(cfg, horizon, synthetic_ybar, synthetic_yv).map_err(|e| StudyError::Demod(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderRow {
    pub epsilon: f64,
    pub sup_x_raw: f64,
    pub sup_x_corrected: f64,
    pub sup_eta: f64,
    pub sup_y_corrected: f64,
    pub ybar_error: f64,
    pub yv_error: f64,
    pub yv_simple_error: f64,
    /// Late-to-early residual ratio; infinite on divergence.
    pub horizon_ratio: f64,
}

/// Names of the fitted series, in [`OrderRow`] order.
pub const SERIES: [&str; 6] = ["sup_x_raw", "sup_x_corrected", "sup_eta", "sup_y_corrected", "ybar_error", "yv_error"];

impl OrderRow {
    pub fn series(&self) -> [f64; 6] {
        [self.sup_x_raw, self.sup_x_corrected, self.sup_eta, self.sup_y_corrected, self.ybar_error, self.yv_error]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesFit {
    pub series: String,
    pub slope: Option<f64>,
    pub r_squared: Option<f64>,
    pub note: Option<String>,
}

impl SeriesFit {
    fn from(series: &str, fit: Result<OrderFit, AveragingError>) -> Self {
        match fit {
            Ok(f) => Self { series: series.into(), slope: Some(f.slope), r_squared: Some(f.r_squared), note: None },
            Err(e) => Self { series: series.into(), slope: None, r_squared: None, note: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderStudy {
    /// Sorted by decreasing `ε`.
    pub rows: Vec<OrderRow>,
    pub fits: Vec<SeriesFit>,
}

impl OrderStudy {
    pub fn slope(&self, series: &str) -> Option<f64> {
        self.fits.iter().find(|f| f.series == series).and_then(|f| f.slope)
    }
}

fn check_levels(levels: &[f64]) -> Result<Vec<f64>, StudyError> {
    if levels.len() < 3 {
        return Err(StudyError::Field {
            field: "epsilons",
            message: format!("need at least 3 levels, got {}", levels.len()),
        });
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted.windows(2).any(|w| (w[0] - w[1]).abs() <= 1e-12 * w[0]) {
        return Err(StudyError::Field { field: "epsilons", message: "duplicate level".into() });
    }
    Ok(sorted)
}

fn order_row(base: &Scenario, epsilon: f64) -> Result<OrderRow, StudyError> {
    let sc = base.at_epsilon(epsilon);
    let pr = PairedRun::simulate(&sc.loop_spec(), sc.t_end, None)?;
    let r = pr.ripple_residual()?;
    let horizon_ratio = long_horizon_bound(&pr, HORIZON_WINDOW).ratio();
    drop(pr);
    let est = estimator_errors(sc.signal(), epsilon, sc.n_periods, sc.h_ratio, sc.t_end)?;
    Ok(OrderRow {
        epsilon,
        sup_x_raw: r.x_raw,
        sup_x_corrected: r.x_corrected,
        sup_eta: r.eta,
        sup_y_corrected: r.y_corrected,
        ybar_error: est.ybar,
        yv_error: est.yv,
        yv_simple_error: est.yv_simple,
        horizon_ratio,
    })
}

/// Paired runs and synthetic estimator runs at each level, then a slope per series.
pub fn run_order_study(base: &Scenario, epsilons: &[f64]) -> Result<OrderStudy, StudyError> {
    let levels = check_levels(epsilons)?;
    let rows: Vec<OrderRow> = levels.par_iter().map(|&e| order_row(base, e)).collect::<Result<Vec<_>, _>>()?;
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let fits = SERIES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let errs: Vec<f64> = rows.iter().map(|r| r.series()[i]).collect();
            SeriesFit::from(name, fit_order(&eps, &errs, INTEGRATOR_FLOOR))
        })
        .collect();
    Ok(OrderStudy { rows, fits })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRow {
    pub n_periods: usize,
    pub ybar_error: f64,
    pub yv_error: f64,
    pub yv_simple_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowStudy {
    pub epsilon: f64,
    pub rows: Vec<WindowRow>,
    pub ybar_slope: f64,
    pub yv_slope: f64,
}

/// Estimator errors against the window length at the base `ε`.
pub fn run_window_study(base: &Scenario, ns: &[usize]) -> Result<WindowStudy, StudyError> {
    let mut ns = ns.to_vec();
    ns.sort_unstable_by(|a, b| b.cmp(a));
    ns.dedup();
    if ns.len() < 3 {
        return Err(StudyError::Field {
            field: "n_periods",
            message: "need at least 3 distinct window lengths".into(),
        });
    }
    let rows: Vec<WindowRow> = ns
        .par_iter()
        .map(|&n| {
            estimator_errors(base.signal(), base.epsilon, n, base.h_ratio, base.t_end).map(|e| WindowRow {
                n_periods: n,
                ybar_error: e.ybar,
                yv_error: e.yv,
                yv_simple_error: e.yv_simple,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let levels: Vec<f64> = rows.iter().map(|r| r.n_periods as f64).collect();
    let fit = |errs: Vec<f64>| fit_order(&levels, &errs, INTEGRATOR_FLOOR).map(|f| f.slope);
    Ok(WindowStudy {
        epsilon: base.epsilon,
        ybar_slope: fit(rows.iter().map(|r| r.ybar_error).collect())?,
        yv_slope: fit(rows.iter().map(|r| r.yv_error).collect())?,
        rows,
    })
}
