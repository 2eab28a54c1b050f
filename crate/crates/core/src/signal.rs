//! Unit-period zero-mean injection waveforms.
//!
//! A waveform `s` is evaluated in the fast variable `σ = t/ε` and has period 1.
//! Its primitive `S` is the unique 1-periodic antiderivative with zero mean,
//! `S(σ) = ∫₀^σ s − ∫₀¹∫₀^μ s dτ dμ`, evaluated in closed form.

use thiserror::Error;

use crate::scalar::{frac, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("phase shift {0} must lie in [0, 1)")]
    PhaseOutOfRange(f64),
    #[error("amplitude {0} must be finite")]
    NonFiniteAmplitude(f64),
    #[error("waveform mean {mean:e} exceeds tolerance {tol:e}")]
    NonZeroMean { mean: f64, tol: f64 },
    #[error("primitive mean {mean:e} exceeds tolerance {tol:e}")]
    NonZeroPrimitiveMean { mean: f64, tol: f64 },
}

/// A unit-period, zero-mean waveform together with its zero-mean primitive.
///
/// Implementors must keep `eval` zero-mean over one period and `primitive`
/// continuous, 1-periodic, zero-mean and an antiderivative of `eval`.
pub trait Waveform<T: Scalar> {
    /// `s(σ)`; discontinuities use the right-limit.
    fn eval(&self, sigma: T) -> T;

    /// `S(σ)`.
    fn primitive(&self, sigma: T) -> T;

    /// `∫₀¹ s²`.
    fn mean_square(&self) -> T;

    /// `∫₀¹ S²`.
    fn primitive_mean_square(&self) -> T;

    /// `sup |S|`.
    fn primitive_sup(&self) -> T;

    /// True when `s` is constant between its switch points.
    fn is_piecewise_constant(&self) -> bool {
        false
    }

    /// Value of `s` on the step `[σ, σ + width)`, assuming switches fall on
    /// step boundaries. Piecewise-constant shapes are probed at the step
    /// midpoint so rounding in `σ` cannot select the wrong side of a switch.
    fn eval_held(&self, sigma: T, width: T) -> T {
        if self.is_piecewise_constant() {
            self.eval(sigma + width / T::lit(2.0))
        } else {
            self.eval(sigma)
        }
    }

    /// Midpoint-rule check of the zero-mean invariants with `points` nodes.
    fn verify_zero_mean(&self, points: usize, tol: T) -> Result<(), SignalError> {
        let n = T::from_usize_lossy(points);
        let (mut ms, mut mp) = (T::zero(), T::zero());
        for i in 0..points {
            let sigma = (T::from_usize_lossy(i) + T::lit(0.5)) / n;
            ms += self.eval(sigma);
            mp += self.primitive(sigma);
        }
        ms /= n;
        mp /= n;
        if ms.abs() > tol {
            return Err(SignalError::NonZeroMean { mean: ms.as_f64(), tol: tol.as_f64() });
        }
        if mp.abs() > tol {
            return Err(SignalError::NonZeroPrimitiveMean { mean: mp.as_f64(), tol: tol.as_f64() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    /// `+A` on the first half of the (shifted) period, `−A` on the second.
    Square,
    /// `A·sin(2π(σ + φ))`.
    Sine,
}

/// Moments of a waveform used by the estimators and noise predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalMoments<T> {
    /// `∫₀¹ s²`.
    pub s_sq_mean: T,
    /// `∫₀¹ S²`.
    pub primitive_sq_mean: T,
    /// `sup |S|`.
    pub primitive_sup: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicSignal<T> {
    shape: Shape,
    amplitude: T,
    phase_shift: T,
}

impl<T: Scalar> PeriodicSignal<T> {
    /// Signal with the default phase: 1/4 for the square wave, which puts a
    /// zero of `S` at `σ = 0`; 0 for the sine.
    pub fn new(shape: Shape, amplitude: T) -> Self {
        let phase_shift = match shape {
            Shape::Square => T::lit(0.25),
            Shape::Sine => T::zero(),
        };
        Self { shape, amplitude, phase_shift }
    }

    pub fn square(amplitude: T) -> Self {
        Self::new(Shape::Square, amplitude)
    }

    pub fn sine(amplitude: T) -> Self {
        Self::new(Shape::Sine, amplitude)
    }

    pub fn with_phase(shape: Shape, amplitude: T, phase_shift: T) -> Result<Self, SignalError> {
        if !amplitude.is_finite() {
            return Err(SignalError::NonFiniteAmplitude(amplitude.as_f64()));
        }
        if !(phase_shift >= T::zero() && phase_shift < T::one()) {
            return Err(SignalError::PhaseOutOfRange(phase_shift.as_f64()));
        }
        Ok(Self { shape, amplitude, phase_shift })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    pub fn phase_shift(&self) -> T {
        self.phase_shift
    }

    pub fn moments(&self) -> SignalMoments<T> {
        SignalMoments {
            s_sq_mean: self.mean_square(),
            primitive_sq_mean: self.primitive_mean_square(),
            primitive_sup: self.primitive_sup(),
        }
    }

    #[inline]
    fn theta(&self, sigma: T) -> T {
        frac(sigma + self.phase_shift)
    }
}

impl<T: Scalar> Waveform<T> for PeriodicSignal<T> {
    fn eval(&self, sigma: T) -> T {
        let theta = self.theta(sigma);
        match self.shape {
            Shape::Square => {
                if theta < T::lit(0.5) {
                    self.amplitude
                } else {
                    -self.amplitude
                }
            }
            Shape::Sine => self.amplitude * (T::TAU() * theta).sin(),
        }
    }

    fn primitive(&self, sigma: T) -> T {
        let theta = self.theta(sigma);
        let a = self.amplitude;
        match self.shape {
            // triangle between -A/4 and A/4
            Shape::Square => {
                let quarter = T::lit(0.25);
                if theta <= T::lit(0.5) {
                    a * (theta - quarter)
                } else {
                    a * (T::lit(0.75) - theta)
                }
            }
            Shape::Sine => -a * (T::TAU() * theta).cos() / T::TAU(),
        }
    }

    fn mean_square(&self) -> T {
        let a2 = self.amplitude * self.amplitude;
        match self.shape {
            Shape::Square => a2,
            Shape::Sine => a2 / T::lit(2.0),
        }
    }

    fn primitive_mean_square(&self) -> T {
        let a2 = self.amplitude * self.amplitude;
        match self.shape {
            Shape::Square => a2 / T::lit(48.0),
            Shape::Sine => a2 / (T::lit(2.0) * T::TAU() * T::TAU()),
        }
    }

    fn primitive_sup(&self) -> T {
        let a = self.amplitude.abs();
        match self.shape {
            Shape::Square => a / T::lit(4.0),
            Shape::Sine => a / T::TAU(),
        }
    }

    fn is_piecewise_constant(&self) -> bool {
        self.shape == Shape::Square
    }
}

/// `s(σ)`.
pub fn eval_s<T: Scalar, W: Waveform<T>>(sig: &W, sigma: T) -> T {
    sig.eval(sigma)
}

/// `S(σ)`.
#[allow(non_snake_case)]
pub fn eval_S<T: Scalar, W: Waveform<T>>(sig: &W, sigma: T) -> T {
    sig.primitive(sigma)
}

/// `∫₀¹ s²`.
pub fn mean_square<T: Scalar, W: Waveform<T>>(sig: &W) -> T {
    sig.mean_square()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_uses_quarter_shift() {
        let s = PeriodicSignal::square(1.0_f64);
        assert_eq!(s.eval(0.0), 1.0);
        assert_eq!(s.eval(0.5), -1.0);
        assert_eq!(s.eval(0.25), -1.0);
        assert_eq!(s.eval(0.75), 1.0);
        assert_eq!(s.eval(0.2), 1.0);
        assert_eq!(s.eval(-0.1), 1.0);
    }

    #[test]
    fn sine_peaks_at_quarter() {
        let s = PeriodicSignal::sine(1.0_f64);
        assert!((s.eval(0.25) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn square_primitive_is_shifted_triangle() {
        let s = PeriodicSignal::square(1.0_f64);
        assert_eq!(s.primitive(0.0), 0.0);
        assert_eq!(s.primitive(0.25), 0.25);
        assert_eq!(s.primitive(0.5), 0.0);
        assert_eq!(s.primitive(0.75), -0.25);
        assert_eq!(s.primitive_sup(), 0.25);
    }

    #[test]
    fn mean_squares() {
        assert_eq!(PeriodicSignal::square(1.0_f64).mean_square(), 1.0);
        assert_eq!(PeriodicSignal::square(2.0_f64).mean_square(), 4.0);
        assert_eq!(PeriodicSignal::sine(1.0_f64).mean_square(), 0.5);
    }

    #[test]
    fn held_value_ignores_rounding_at_switches() {
        let s = PeriodicSignal::square(1.0_f64);
        // just below / above the switch at 1/4
        assert_eq!(s.eval_held(0.25 - 1e-13, 0.01), -1.0);
        assert_eq!(s.eval_held(0.25 + 1e-13, 0.01), -1.0);
        assert_eq!(s.eval_held(0.24, 0.01), 1.0);
    }

    #[test]
    fn primitive_means_vanish_on_fine_grid() {
        for sig in [PeriodicSignal::square(1.0_f64), PeriodicSignal::sine(1.0)] {
            let n = 1_000_000;
            let mean: f64 = (0..n).map(|k| sig.primitive(k as f64 / n as f64)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 1e-10, "{mean}");
        }
    }

    #[test]
    fn quadrature_confirms_zero_mean() {
        PeriodicSignal::square(1.0_f64).verify_zero_mean(4096, 1e-12).unwrap();
        PeriodicSignal::sine(3.0_f64).verify_zero_mean(4096, 1e-12).unwrap();
        PeriodicSignal::square(1.0_f32).verify_zero_mean(4096, 1e-5).unwrap();
    }

    #[test]
    fn primitive_mean_square_matches_quadrature() {
        for sig in [PeriodicSignal::square(1.5_f64), PeriodicSignal::sine(1.5)] {
            let n = 200_000;
            let q: f64 = (0..n)
                .map(|k| {
                    let v = sig.primitive((k as f64 + 0.5) / n as f64);
                    v * v
                })
                .sum::<f64>()
                / n as f64;
            assert!((q - sig.primitive_mean_square()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_invalid_phase() {
        assert!(PeriodicSignal::with_phase(Shape::Sine, 1.0_f64, 1.0).is_err());
        assert!(PeriodicSignal::with_phase(Shape::Sine, 1.0_f64, -0.1).is_err());
        assert!(PeriodicSignal::with_phase(Shape::Sine, f64::NAN, 0.1).is_err());
    }
}
