//! Band-limited white measurement noise and estimator noise floors.
//!
//! A white noise of power spectral density `Ψ` sampled and held every `T_s`
//! seconds has per-sample variance `σ² = Ψ / T_s`. Through a sliding mean of
//! length `nε` it keeps roughly `nε / T_s` independent samples, so
//!
//! ```text
//! var(ν̄)   ≈ σ² T_s / (nε)
//! var(ν̂_v) ≈ var(ν̄) / (ε² ⟨c²⟩)      simple estimator
//! ```
//!
//! since `c(t/ε)ν(t)` is again white with PSD `⟨c²⟩Ψ`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::demod::{DemodConfig, DemodError, Demodulator};
use crate::scalar::integer_ratio;
use crate::signal::Waveform;
use crate::sim::TimeGrid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("noise sample time {0} must be positive")]
    BadSampleTime(f64),
    #[error("noise power {0} must be non-negative and finite")]
    BadPower(f64),
    #[error("grid step {step} does not divide noise sample time {sample_time}")]
    Misaligned { step: f64, sample_time: f64 },
    #[error("duration {duration} is shorter than the required {required}")]
    TooShort { duration: f64, required: f64 },
    #[error(transparent)]
    Demod(#[from] DemodError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sample_time: f64,
    /// Power spectral density `Ψ`.
    pub power: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sample_time: f64, power: f64, seed: u64) -> Result<Self, NoiseError> {
        if !(sample_time > 0.0) || !sample_time.is_finite() {
            return Err(NoiseError::BadSampleTime(sample_time));
        }
        if !(power >= 0.0) || !power.is_finite() {
            return Err(NoiseError::BadPower(power));
        }
        Ok(Self { sample_time, power, seed })
    }

    /// Per-sample standard deviation `sqrt(Ψ / T_s)`.
    pub fn sigma(&self) -> f64 {
        (self.power / self.sample_time).sqrt()
    }

    /// Grid points per noise sample.
    pub fn hold_len(&self, step: f64) -> Result<usize, NoiseError> {
        integer_ratio(self.sample_time, step).ok_or(NoiseError::Misaligned { step, sample_time: self.sample_time })
    }
}

/// Zero-order-hold Gaussian noise, one value per grid point.
pub fn generate_noise(spec: &NoiseSpec, grid: &TimeGrid<f64>) -> Result<Vec<f64>, NoiseError> {
    let hold = spec.hold_len(grid.step())?;
    generate_held(spec, hold, grid.len())
}

fn generate_held(spec: &NoiseSpec, hold: usize, len: usize) -> Result<Vec<f64>, NoiseError> {
    let sigma = spec.sigma();
    if sigma == 0.0 {
        return Ok(vec![0.0; len]);
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| NoiseError::BadPower(spec.power))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let v = normal.sample(&mut rng);
        let take = hold.min(len - out.len());
        out.extend(std::iter::repeat_n(v, take));
    }
    Ok(out)
}

/// Magnitude of the sliding-mean transfer function `(1 − e^{−jnεω})/(jnεω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlidingAverageResponse {
    pub n: usize,
    pub epsilon: f64,
}

impl SlidingAverageResponse {
    /// `|sinc(nεω/2)|`.
    pub fn gain(&self, omega: f64) -> f64 {
        let x = self.n as f64 * self.epsilon * omega / 2.0;
        if x == 0.0 {
            1.0
        } else {
            (x.sin() / x).abs()
        }
    }
}

pub fn sliding_average_gain(resp: &SlidingAverageResponse, omega: f64) -> f64 {
    resp.gain(omega)
}

/// Predicted variance of `ŷ̄` under white noise.
pub fn predicted_ybar_variance(spec: &NoiseSpec, n: usize, epsilon: f64) -> f64 {
    let s = spec.sigma();
    s * s * spec.sample_time / (n as f64 * epsilon)
}

/// Predicted variance of the simple `ŷ_v` given the carrier mean square `⟨c²⟩`.
pub fn predicted_yv_simple_variance(spec: &NoiseSpec, n: usize, epsilon: f64, carrier_sq_mean: f64) -> f64 {
    predicted_ybar_variance(spec, n, epsilon) / (epsilon * epsilon * carrier_sq_mean)
}

/// Empirical variances of the estimator outputs driven by pure noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorNoise {
    pub var_ybar: f64,
    pub var_yv: f64,
    pub var_yv_simple: f64,
    /// `⟨c²⟩` of the demodulator carrier on its sample grid.
    pub carrier_sq_mean: f64,
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Feeds `duration` seconds of noise (no signal) through a demodulator and
/// returns the variances of its outputs once warm.
pub fn measure_estimator_noise<W: Waveform<f64> + Clone>(
    config: &DemodConfig<f64, W>,
    spec: &NoiseSpec,
    duration: f64,
) -> Result<EstimatorNoise, NoiseError> {
    let window_time = config.n_periods as f64 * config.epsilon;
    let required = 1000.0 * window_time;
    if duration < required * (1.0 - 1e-9) {
        return Err(NoiseError::TooShort { duration, required });
    }
    let h = config.sample_step;
    let hold = spec.hold_len(h)?;
    let steps = integer_ratio(duration, h).ok_or(NoiseError::Misaligned { step: h, sample_time: duration })?;
    let noise = generate_held(spec, hold, steps + 1)?;
    let mut demod = Demodulator::new(config.clone())?;
    let cap = steps + 1;
    let (mut ybar, mut yv, mut yvs) = (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
    for (k, nu) in noise.iter().enumerate() {
        let e = demod.push_sample(k as f64 * h, *nu)?;
        if let (Some(a), Some(b), Some(c)) = (e.ybar, e.yv, e.yv_simple) {
            ybar.push(a);
            yv.push(b);
            yvs.push(c);
        }
    }
    Ok(EstimatorNoise {
        var_ybar: variance(&ybar),
        var_yv: variance(&yv),
        var_yv_simple: variance(&yvs),
        carrier_sq_mean: demod.carrier_sq_mean(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_from_power_and_sample_time() {
        let spec = NoiseSpec::new(2e-5, 2e-11, 1).unwrap();
        assert!((spec.sigma() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn zero_power_is_silent() {
        let spec = NoiseSpec::new(2e-5, 0.0, 1).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 1e-5).unwrap();
        assert!(generate_noise(&spec, &grid).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn held_between_noise_samples() {
        let spec = NoiseSpec::new(2e-5, 2e-11, 9).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 1e-5).unwrap();
        let nu = generate_noise(&spec, &grid).unwrap();
        assert_eq!(nu.len(), grid.len());
        for pair in nu.chunks_exact(2) {
            assert_eq!(pair[0], pair[1]);
        }
        assert_ne!(nu[0], nu[2]);
        let bad = TimeGrid::new(0.0, 0.01, 3e-5 / 2.0 * 1.0001);
        if let Ok(g) = bad {
            assert!(generate_noise(&spec, &g).is_err());
        }
    }

    #[test]
    fn empirical_variance_matches_sigma() {
        let spec = NoiseSpec::new(1e-5, 1e-10, 3).unwrap();
        let grid = TimeGrid::new(0.0, 10.0, 1e-5).unwrap();
        let nu = generate_noise(&spec, &grid).unwrap();
        let s2 = spec.sigma().powi(2);
        assert!((variance(&nu[..1_000_000]) / s2 - 1.0).abs() < 0.01);
    }

    #[test]
    fn seeded_determinism() {
        let spec = NoiseSpec::new(2e-5, 2e-11, 77).unwrap();
        let grid = TimeGrid::new(0.0, 0.1, 1e-5).unwrap();
        assert_eq!(generate_noise(&spec, &grid).unwrap(), generate_noise(&spec, &grid).unwrap());
        let other = NoiseSpec { seed: 78, ..spec };
        assert_ne!(generate_noise(&spec, &grid).unwrap(), generate_noise(&other, &grid).unwrap());
    }

    #[test]
    fn sliding_average_gain_shape() {
        let r = SlidingAverageResponse { n: 10, epsilon: 1e-3 };
        assert_eq!(r.gain(0.0), 1.0);
        let first_zero = 2.0 * std::f64::consts::PI / (10.0 * 1e-3);
        assert!(r.gain(first_zero) < 1e-12);
        for k in 1..200 {
            let w = first_zero * (1.0 + k as f64 * 0.37);
            assert!(r.gain(w) <= 2.0 / (10.0 * 1e-3 * w) + 1e-15);
        }
    }
}
