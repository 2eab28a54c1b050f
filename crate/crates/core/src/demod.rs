//! Sliding-window heterodyne estimators for `ȳ` and `ȳ_v`.
//!
//! The measurement is assumed to have the form `y = ȳ + ε·ȳ_v·c(t/ε) + ν`,
//! where `c` is the carrier: the zero-mean primitive `S` of the injected
//! signal for a measurement produced by injection, or any other unit-period
//! zero-mean waveform. Two estimators are maintained over a window of `n`
//! carrier periods:
//!
//! ```text
//! ŷ̄(t)   = ⟨y⟩(t)
//! ŷ_v(t) = ⟨(y(τ − nε/2) − ŷ̄(τ))·c((τ − nε/2)/ε)⟩(t) / (ε⟨c²⟩)   delayed-residual form
//! ŷ_v(t) = ⟨y(τ)·c(τ/ε)⟩(t) / (ε⟨c²⟩)                          simple form
//! ```
//!
//! where `⟨·⟩(t)` is the mean over `[t − nε, t]`. Window means use the
//! trapezoid rule on a sample grid dividing `ε/4`, i.e. a left-Riemann sum plus
//! an end-point correction. For a periodic integrand on whole periods the
//! correction vanishes, so square-wave products integrate exactly, and a
//! linear trend is averaged exactly to its window-centre value.
//!
//! Group delay: `ŷ̄` lags by `nε/2`; the delayed-residual `ŷ_v` lags by `nε`
//! (half from the delayed argument, half from the outer average).

use std::collections::VecDeque;

use thiserror::Error;

use crate::scalar::{frac, integer_ratio, Scalar};
use crate::signal::{PeriodicSignal, Waveform};

/// Running sums are rebuilt from their buffers this often.
pub const RECOMPUTE_EVERY: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemodError {
    #[error("carrier period {0} must be positive and finite")]
    BadPeriod(f64),
    #[error("window must span at least one period (n = {0})")]
    EmptyWindow(usize),
    #[error("sample step {step} does not divide a quarter of the period {epsilon}")]
    MisalignedStep { step: f64, epsilon: f64 },
    #[error("sample at t = {got} is off the uniform grid (expected {expected})")]
    NonUniform { expected: f64, got: f64 },
}

/// Which waveform the ripple is modulated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Carrier {
    /// The injected signal `s` itself.
    Signal,
    /// Its zero-mean primitive `S`; this is the ripple produced by injecting `s`.
    Primitive,
}

/// Which virtual-output estimator feeds a consumer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// Delayed-residual form; accurate for slowly varying `ȳ`, `ȳ_v`.
    DelayedResidual,
    /// Correlation of the raw measurement; assumes `ȳ`, `ȳ_v` constant over the window.
    Simple,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemodConfig<T, W = PeriodicSignal<T>> {
    pub epsilon: T,
    pub n_periods: usize,
    pub sample_step: T,
    pub signal: W,
    pub carrier: Carrier,
}

impl<T: Scalar, W: Waveform<T>> DemodConfig<T, W> {
    pub fn new(epsilon: T, n_periods: usize, sample_step: T, signal: W, carrier: Carrier) -> Self {
        Self { epsilon, n_periods, sample_step, signal, carrier }
    }

    /// Samples per carrier period, checked to be a multiple of 4.
    pub fn samples_per_period(&self) -> Result<usize, DemodError> {
        if !(self.epsilon > T::zero()) || !self.epsilon.is_finite() {
            return Err(DemodError::BadPeriod(self.epsilon.as_f64()));
        }
        if self.n_periods == 0 {
            return Err(DemodError::EmptyWindow(0));
        }
        let quarter = integer_ratio(self.epsilon / T::lit(4.0), self.sample_step)
            .ok_or(DemodError::MisalignedStep { step: self.sample_step.as_f64(), epsilon: self.epsilon.as_f64() })?;
        Ok(4 * quarter)
    }

    /// Window length `N = nε / sample_step` in samples.
    pub fn window_len(&self) -> Result<usize, DemodError> {
        Ok(self.n_periods * self.samples_per_period()?)
    }

    /// Capacity of the raw measurement buffer, `3N/2 + 1`.
    pub fn raw_capacity(&self) -> Result<usize, DemodError> {
        Ok(3 * self.window_len()? / 2 + 1)
    }
}

/// Output of one [`Demodulator::push_sample`]; `None` until the estimator's
/// history covers its dependency window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate<T> {
    /// `ŷ̄`, valid after `nε`.
    pub ybar: Option<T>,
    /// Delayed-residual `ŷ_v`, valid after `2nε`.
    pub yv: Option<T>,
    /// Simple `ŷ_v`, valid after `nε`.
    pub yv_simple: Option<T>,
}

impl<T: Copy> Estimate<T> {
    pub fn virtual_output(&self, which: Estimator) -> Option<T> {
        match which {
            Estimator::DelayedResidual => self.yv,
            Estimator::Simple => self.yv_simple,
        }
    }
}

/// Window sums of the three running integrands over their last `N + 1` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSums<T> {
    pub y: T,
    pub residual: T,
    pub product: T,
}

/// Fixed-length window with a running sum.
#[derive(Debug, Clone)]
struct Window<T> {
    buf: VecDeque<T>,
    cap: usize,
    sum: T,
}

impl<T: Scalar> Window<T> {
    fn new(cap: usize) -> Self {
        Self { buf: VecDeque::with_capacity(cap), cap, sum: T::zero() }
    }

    fn push(&mut self, v: T) {
        if self.buf.len() == self.cap {
            let old = self.buf.pop_front().unwrap_or_else(T::zero);
            self.sum -= old;
        }
        self.buf.push_back(v);
        self.sum += v;
    }

    fn is_full(&self) -> bool {
        self.buf.len() == self.cap
    }

    fn recompute(&self) -> T {
        self.buf.iter().fold(T::zero(), |a, &v| a + v)
    }

    fn resync(&mut self) {
        self.sum = self.recompute();
    }

    /// Trapezoid mean over the `cap − 1` intervals spanned by a full window.
    fn trapezoid_mean(&self) -> T {
        let first = self.buf.front().copied().unwrap_or_else(T::zero);
        let last = self.buf.back().copied().unwrap_or_else(T::zero);
        let intervals = T::from_usize_lossy(self.cap - 1);
        (self.sum - (first + last) / T::lit(2.0)) / intervals
    }
}

/// Streaming demodulator for one measurement channel.
#[derive(Debug, Clone)]
pub struct Demodulator<T, W = PeriodicSignal<T>> {
    cfg: DemodConfig<T, W>,
    window: usize,
    per_period: usize,
    /// Window mean of `c²` on the sample grid; the same for every whole-period window.
    carrier_sq_mean: T,
    phase0: T,
    t0: Option<T>,
    count: usize,
    raw: VecDeque<T>,
    raw_cap: usize,
    y_win: Window<T>,
    residual_win: Window<T>,
    product_win: Window<T>,
    last: Estimate<T>,
}

impl<T: Scalar, W: Waveform<T>> Demodulator<T, W> {
    pub fn new(cfg: DemodConfig<T, W>) -> Result<Self, DemodError> {
        let per_period = cfg.samples_per_period()?;
        let window = cfg.window_len()?;
        let raw_cap = cfg.raw_capacity()?;
        let mut d = Self {
            window,
            per_period,
            carrier_sq_mean: T::zero(),
            phase0: T::zero(),
            t0: None,
            count: 0,
            raw: VecDeque::with_capacity(raw_cap),
            raw_cap,
            y_win: Window::new(window + 1),
            residual_win: Window::new(window + 1),
            product_win: Window::new(window + 1),
            last: Estimate::default(),
            cfg,
        };
        d.carrier_sq_mean = d.grid_carrier_sq_mean();
        Ok(d)
    }

    pub fn config(&self) -> &DemodConfig<T, W> {
        &self.cfg
    }

    /// Window length in samples.
    pub fn window_len(&self) -> usize {
        self.window
    }

    pub fn raw_capacity(&self) -> usize {
        self.raw_cap
    }

    pub fn raw_len(&self) -> usize {
        self.raw.len()
    }

    pub fn samples_seen(&self) -> usize {
        self.count
    }

    /// Trapezoid mean of `c²` over one period of the sample grid.
    fn grid_carrier_sq_mean(&self) -> T {
        let mut acc = T::zero();
        for j in 0..self.per_period {
            let c = self.carrier_at(j);
            acc += c * c;
        }
        acc / T::from_usize_lossy(self.per_period)
    }

    /// Carrier value attached to sample `j`, i.e. on `[t_j, t_j + step)`.
    pub fn carrier_at(&self, j: usize) -> T {
        let p = T::from_usize_lossy(self.per_period);
        let sigma = frac(self.phase0 + T::from_usize_lossy(j % self.per_period) / p);
        match self.cfg.carrier {
            Carrier::Signal => self.cfg.signal.eval_held(sigma, T::one() / p),
            Carrier::Primitive => self.cfg.signal.primitive(sigma),
        }
    }

    /// Mean of `c²` used as the estimator denominator.
    pub fn carrier_sq_mean(&self) -> T {
        self.carrier_sq_mean
    }

    /// Feeds the sample `y(t)` and returns the current estimates.
    ///
    /// Samples must arrive on the uniform grid `t0 + k·sample_step`.
    pub fn push_sample(&mut self, t: T, y: T) -> Result<Estimate<T>, DemodError> {
        let h = self.cfg.sample_step;
        match self.t0 {
            None => {
                self.t0 = Some(t);
                self.phase0 = frac(t / self.cfg.epsilon);
                if self.phase0 != T::zero() {
                    self.carrier_sq_mean = self.grid_carrier_sq_mean();
                }
            }
            Some(t0) => {
                let expected = t0 + T::from_usize_lossy(self.count) * h;
                if (t - expected).abs() > h * T::lit(1e-6) {
                    return Err(DemodError::NonUniform { expected: expected.as_f64(), got: t.as_f64() });
                }
            }
        }
        let k = self.count;
        self.count += 1;

        if self.raw.len() == self.raw_cap {
            self.raw.pop_front();
        }
        self.raw.push_back(y);
        self.y_win.push(y);
        let c_now = self.carrier_at(k);
        self.product_win.push(y * c_now);

        if self.count.is_multiple_of(RECOMPUTE_EVERY) {
            self.y_win.resync();
            self.residual_win.resync();
            self.product_win.resync();
        }

        let n = self.window;
        let half = n / 2;
        let denom = self.cfg.epsilon * self.carrier_sq_mean;
        let ratio = |num: T| if denom == T::zero() { T::zero() } else { num / denom };

        let mut est = Estimate::default();
        if self.y_win.is_full() {
            let ybar = self.y_win.trapezoid_mean();
            est.ybar = Some(ybar);
            est.yv_simple = Some(ratio(self.product_win.trapezoid_mean()));
            // raw holds y_{k-raw.len()+1 ..= k}; index of y_{k-half}
            let lagged = self.raw[self.raw.len() - 1 - half];
            self.residual_win.push((lagged - ybar) * self.carrier_at(k - half));
            if self.residual_win.is_full() {
                est.yv = Some(ratio(self.residual_win.trapezoid_mean()));
            }
        }
        self.last = est;
        Ok(est)
    }

    /// Estimates returned by the most recent push.
    pub fn last(&self) -> Estimate<T> {
        self.last
    }

    /// Simple-form `ŷ_v` at the most recent sample.
    pub fn estimate_yv_simple(&self) -> Option<T> {
        self.last.yv_simple
    }

    pub fn window_sums(&self) -> WindowSums<T> {
        WindowSums { y: self.y_win.sum, residual: self.residual_win.sum, product: self.product_win.sum }
    }

    /// The same sums rebuilt directly from the buffers.
    pub fn recompute_window_sums(&self) -> WindowSums<T> {
        WindowSums {
            y: self.y_win.recompute(),
            residual: self.residual_win.recompute(),
            product: self.product_win.recompute(),
        }
    }
}

/// Sup-errors of the three estimators on a synthetic measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorErrors<T> {
    /// `sup |ŷ̄(t) − ȳ(t − nε/2)|`.
    pub ybar: T,
    /// `sup |ŷ_v(t) − ȳ_v(t)|`, delayed-residual form.
    pub yv: T,
    /// `sup |ŷ_v(t) − ȳ_v(t)|`, simple form.
    pub yv_simple: T,
}

/// Feeds `y = ȳ(t) + ε·ȳ_v(t)·c(t/ε)` on `[0, horizon]` and measures the
/// estimator errors once all three estimates are valid.
pub fn synthetic_errors<T, W, F, G>(
    cfg: DemodConfig<T, W>,
    horizon: T,
    ybar: F,
    yv: G,
) -> Result<EstimatorErrors<T>, DemodError>
where
    T: Scalar,
    W: Waveform<T>,
    F: Fn(T) -> T,
    G: Fn(T) -> T,
{
    let h = cfg.sample_step;
    let eps = cfg.epsilon;
    let half_window = T::from_usize_lossy(cfg.n_periods) * eps / T::lit(2.0);
    let steps =
        integer_ratio(horizon, h).ok_or(DemodError::MisalignedStep { step: h.as_f64(), epsilon: horizon.as_f64() })?;
    let mut d = Demodulator::new(cfg)?;
    let mut err = EstimatorErrors { ybar: T::zero(), yv: T::zero(), yv_simple: T::zero() };
    for k in 0..=steps {
        let t = T::from_usize_lossy(k) * h;
        let y = ybar(t) + eps * yv(t) * d.carrier_at(k);
        let e = d.push_sample(t, y)?;
        if let (Some(a), Some(b), Some(c)) = (e.ybar, e.yv, e.yv_simple) {
            err.ybar = err.ybar.max((a - ybar(t - half_window)).abs());
            err.yv = err.yv.max((b - yv(t)).abs());
            err.yv_simple = err.yv_simple.max((c - yv(t)).abs());
        }
    }
    Ok(err)
}
