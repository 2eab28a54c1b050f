//! Paired injected/averaged runs and the order-of-accuracy checks built on them.
//!
//! The injected run drives the loop with `s(t/ε)` on the input. The averaged
//! run is the same loop with the injection removed and the exact virtual output
//! fed back. Their difference, with the first-order ripple `ε g S(t/ε)` taken
//! out, should shrink like `ε²`.

use thiserror::Error;

use crate::closed_loop::{ExampleLoop, FeedbackSource, LoopError, LoopSpec, ETA, PLANT};
use crate::plant::{virtual_output, Plant};
use crate::scalar::Scalar;
use crate::signal::Waveform;
use crate::sim::{simulate, SimError, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AveragingError {
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("order fit needs at least 3 levels, got {0}")]
    TooFewLevels(usize),
    #[error("levels must be strictly decreasing and positive")]
    NotDecreasing,
    #[error("error {error:e} at level {level:e} is within 10x of the floor {floor:e}")]
    AtFloor { level: f64, error: f64, floor: f64 },
    #[error("transient {0} leaves no samples")]
    NoSamples(f64),
}

/// An injected run and its averaged counterpart on a shared grid.
#[derive(Debug, Clone)]
pub struct PairedRun<T, W = crate::signal::PeriodicSignal<T>> {
    pub injected: Trajectory<T>,
    pub averaged: Trajectory<T>,
    pub epsilon: T,
    pub signal: W,
    /// Samples before this time are ignored by the residual measures.
    pub transient: T,
    plant: crate::plant::ExamplePlant<T>,
}

/// Sup-norms of the four residual series after the transient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RippleResidual<T> {
    /// `|x − x̄|`, first order in `ε`.
    pub x_raw: T,
    /// `|x − x̄ − ε g S(t/ε)|`.
    pub x_corrected: T,
    /// `|η − η̄|`.
    pub eta: T,
    /// `|y − h(x̄) − ε L_g h(x̄) S(t/ε)|`.
    pub y_corrected: T,
}

impl<T: Scalar> RippleResidual<T> {
    pub fn as_array(&self) -> [T; 4] {
        [self.x_raw, self.x_corrected, self.eta, self.y_corrected]
    }

    fn absorb(&mut self, other: [T; 4]) {
        self.x_raw = self.x_raw.max(other[0]);
        self.x_corrected = self.x_corrected.max(other[1]);
        self.eta = self.eta.max(other[2]);
        self.y_corrected = self.y_corrected.max(other[3]);
    }
}

impl<T: Scalar, W: Waveform<T> + Clone> PairedRun<T, W> {
    /// Simulates both runs on `[0, t_end]`. The feedback source of `spec` is
    /// replaced by the exact virtual output and estimate monitoring is
    /// switched off; the transient defaults to one demodulation window `nε`.
    pub fn simulate(spec: &LoopSpec<T, W>, t_end: T, transient: Option<T>) -> Result<Self, AveragingError> {
        let base = LoopSpec { feedback: FeedbackSource::IdealVirtualOutput, monitor_estimates: false, ..spec.clone() };
        let mut inj = ExampleLoop::new(LoopSpec { inject: true, ..base.clone() })?;
        let mut avg = ExampleLoop::new(LoopSpec { inject: false, ..base })?;
        let grid = inj.grid(t_end)?;
        let x0 = inj.initial_state();
        let injected = simulate(&mut inj, &grid, &x0)?;
        let averaged = simulate(&mut avg, &grid, &x0)?;
        Ok(Self {
            injected,
            averaged,
            epsilon: spec.epsilon,
            signal: spec.signal.clone(),
            transient: transient.unwrap_or(T::from_usize_lossy(spec.n_periods) * spec.epsilon),
            plant: inj.plant().clone(),
        })
    }

    fn first_index(&self) -> usize {
        let tol = self.epsilon * T::lit(1e-9);
        self.injected.times.iter().position(|&t| t >= self.transient - tol).unwrap_or(self.injected.len())
    }

    /// Pointwise residuals at sample `k`, in the order of [`RippleResidual::as_array`].
    pub fn residuals_at(&self, k: usize) -> [T; 4] {
        let t = self.injected.times[k];
        let xs = self.injected.state(k);
        let xa = self.averaged.state(k);
        let ripple = self.epsilon * self.signal.primitive(t / self.epsilon);
        let (p, pa) = (&xs[PLANT], &xa[PLANT]);
        let mut g = [T::zero(); 3];
        self.plant.input_field(pa, &mut g);
        let mut raw = T::zero();
        let mut corr = T::zero();
        for i in 0..3 {
            raw = raw.max((p[i] - pa[i]).abs());
            corr = corr.max((p[i] - pa[i] - ripple * g[i]).abs());
        }
        let eta = xs[ETA].iter().zip(&xa[ETA]).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        let y = self.plant.output(p) - self.plant.output(pa) - ripple * virtual_output(&self.plant, pa);
        [raw, corr, eta, y.abs()]
    }

    /// Sup-norm residuals over `[transient, t_end]`.
    pub fn ripple_residual(&self) -> Result<RippleResidual<T>, AveragingError> {
        let start = self.first_index();
        if start >= self.injected.len() {
            return Err(AveragingError::NoSamples(self.transient.as_f64()));
        }
        let mut r = RippleResidual::default();
        for k in start..self.injected.len() {
            r.absorb(self.residuals_at(k));
        }
        Ok(r)
    }

    /// Sup-norm residuals over the sample range `[from, to)`.
    fn residual_over(&self, from: usize, to: usize) -> RippleResidual<T> {
        let mut r = RippleResidual::default();
        for k in from..to {
            r.absorb(self.residuals_at(k));
        }
        r
    }
}

/// Free-function form of [`PairedRun::ripple_residual`].
pub fn ripple_residual<T: Scalar, W: Waveform<T> + Clone>(
    run: &PairedRun<T, W>,
) -> Result<RippleResidual<T>, AveragingError> {
    run.ripple_residual()
}

/// Least-squares slope of `log error` against `log level`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub levels: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub r_squared: f64,
}

/// Fits the convergence order. Rejects fewer than three levels, levels that
/// are not strictly decreasing, and any error within a factor 10 of `floor`.
pub fn fit_order(levels: &[f64], errors: &[f64], floor: f64) -> Result<OrderFit, AveragingError> {
    let n = levels.len().min(errors.len());
    if n < 3 {
        return Err(AveragingError::TooFewLevels(n));
    }
    if levels.iter().any(|&e| !(e > 0.0)) || levels.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(AveragingError::NotDecreasing);
    }
    for (&level, &error) in levels.iter().zip(errors) {
        if !(error > 10.0 * floor) || !error.is_finite() {
            return Err(AveragingError::AtFloor { level, error, floor });
        }
    }
    let xs: Vec<f64> = levels[..n].iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors[..n].iter().map(|v| v.ln()).collect();
    let (slope, r_squared) = log_log_fit(&xs, &ys);
    Ok(OrderFit { levels: levels[..n].to_vec(), errors: errors[..n].to_vec(), slope, r_squared })
}

fn log_log_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Outcome of comparing late residuals with early ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HorizonBound {
    /// Worst ratio of late to early sup-norm over the four residual series.
    Bounded(f64),
    Diverged,
}

impl HorizonBound {
    pub fn ratio(&self) -> f64 {
        match self {
            HorizonBound::Bounded(r) => *r,
            HorizonBound::Diverged => f64::INFINITY,
        }
    }
}

/// Ratios above this are reported as divergence.
pub const DIVERGENCE_RATIO: f64 = 1e3;

/// Compares residual sup-norms over the first and last `window_fraction` of
/// the post-transient horizon.
pub fn long_horizon_bound<T: Scalar, W: Waveform<T> + Clone>(
    run: &PairedRun<T, W>,
    window_fraction: f64,
) -> HorizonBound {
    let start = run.first_index();
    let len = run.injected.len();
    let span = len.saturating_sub(start);
    let w = ((span as f64 * window_fraction.clamp(0.0, 0.5)).round() as usize).max(1);
    if span < 2 * w {
        return HorizonBound::Bounded(1.0);
    }
    let early = run.residual_over(start, start + w).as_array();
    let late = run.residual_over(len - w, len).as_array();
    let mut worst = 0.0_f64;
    for (e, l) in early.iter().zip(&late) {
        let (e, l) = (e.as_f64(), l.as_f64());
        if !l.is_finite() || !e.is_finite() {
            return HorizonBound::Diverged;
        }
        let r = if l == 0.0 {
            1.0
        } else if e == 0.0 {
            f64::INFINITY
        } else {
            l / e
        };
        worst = worst.max(r);
    }
    if worst > DIVERGENCE_RATIO {
        HorizonBound::Diverged
    } else {
        HorizonBound::Bounded(worst)
    }
}

/// Simulates the pair and applies [`long_horizon_bound`], mapping numerical
/// blow-up during integration to [`HorizonBound::Diverged`].
pub fn long_horizon_check<T: Scalar, W: Waveform<T> + Clone>(
    spec: &LoopSpec<T, W>,
    t_end: T,
    window_fraction: f64,
) -> Result<HorizonBound, AveragingError> {
    match PairedRun::simulate(spec, t_end, None) {
        Ok(run) => Ok(long_horizon_bound(&run, window_fraction)),
        Err(AveragingError::Sim(SimError::NonFiniteDerivative { .. } | SimError::NonFiniteState { .. })) => {
            Ok(HorizonBound::Diverged)
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_power_law() {
        let eps = [4e-3, 2e-3, 1e-3, 5e-4];
        let err: Vec<f64> = eps.iter().map(|e| 3.0 * e * e).collect();
        let fit = fit_order(&eps, &err, 1e-14).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_levels() {
        assert!(matches!(fit_order(&[1.0, 0.5], &[1.0, 0.5], 0.0), Err(AveragingError::TooFewLevels(2))));
        assert!(matches!(fit_order(&[1.0, 1.0, 0.5], &[1.0, 1.0, 0.5], 0.0), Err(AveragingError::NotDecreasing)));
        assert!(matches!(fit_order(&[1.0, 0.5, 0.25], &[1.0, 0.5, 1e-13], 1e-14), Err(AveragingError::AtFloor { .. })));
    }
}
