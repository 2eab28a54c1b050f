//! Observer-based compensator for the example plant and the injected control law.
//!
//! The controller acts on the estimate `η = (x̂₁, x̂₂, x̂₃, d̂)` of an observer
//! that sees only `y_v = x₁` and carries a constant-disturbance state, which
//! gives the loop integral action:
//!
//! ```text
//! u    = −k₁x̂₁ − k₂x̂₂ − k₃x̂₃ − k_d d̂ + k·x₁ʳᵉᶠ
//! x̂₁' = x̂₂ + l₁(y_v − x̂₁)
//! x̂₂' = x̂₃ + l₂(y_v − x̂₁)
//! x̂₃' = u + d̂ + l₃(y_v − x̂₁)
//! d̂'  = l_d(y_v − x̂₁)
//! ```
//!
//! Both the controller and the observer error dynamics are companion forms, so
//! the gains are the coefficients of the monic polynomial with the requested roots.

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::signal::Waveform;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("pole set is not closed under complex conjugation")]
    NotConjugateClosed,
    #[error("pole {re}{im:+}i is not in the open left half-plane")]
    Unstable { re: f64, im: f64 },
    #[error("pole {re}{im:+}i is not finite")]
    NonFinite { re: f64, im: f64 },
    #[error("injection period {0} must be positive")]
    BadPeriod(f64),
}

fn conj_tol<T: Scalar>(poles: &[Complex<T>]) -> T {
    let scale = poles.iter().fold(T::one(), |m, p| m.max(p.norm()));
    T::lit(1e3) * T::epsilon() * scale
}

fn check_conjugate_closed<T: Scalar>(poles: &[Complex<T>]) -> Result<(), ControlError> {
    let tol = conj_tol(poles);
    let mut used = vec![false; poles.len()];
    for i in 0..poles.len() {
        let p = poles[i];
        if !p.re.is_finite() || !p.im.is_finite() {
            return Err(ControlError::NonFinite { re: p.re.as_f64(), im: p.im.as_f64() });
        }
        if used[i] || p.im.abs() <= tol {
            continue;
        }
        let partner = (0..poles.len()).find(|&j| j != i && !used[j] && (poles[j] - p.conj()).norm() <= tol);
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return Err(ControlError::NotConjugateClosed),
        }
    }
    Ok(())
}

/// Coefficients `[c₁, …, c_n]` of the monic polynomial `∏(s − pᵢ) = sⁿ + c₁sⁿ⁻¹ + … + c_n`.
///
/// Rejects pole sets that are not conjugate-closed; stability is not checked.
pub fn char_poly_coeffs<T: Scalar>(poles: &[Complex<T>]) -> Result<Vec<T>, ControlError> {
    check_conjugate_closed(poles)?;
    // descending powers, leading 1
    let mut c: Vec<Complex<T>> = vec![Complex::new(T::one(), T::zero())];
    for p in poles {
        let mut next = vec![Complex::new(T::zero(), T::zero()); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] += *ci;
            next[i + 1] -= *ci * *p;
        }
        c = next;
    }
    Ok(c.into_iter().skip(1).map(|z| z.re).collect())
}

fn check_stable<T: Scalar>(poles: &[Complex<T>]) -> Result<(), ControlError> {
    match poles.iter().find(|p| !(p.re < T::zero())) {
        Some(p) => Err(ControlError::Unstable { re: p.re.as_f64(), im: p.im.as_f64() }),
        None => Ok(()),
    }
}

/// State-feedback gains for the chain `ẋ₁ = x₂, ẋ₂ = x₃, ẋ₃ = u + d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains<T> {
    pub k1: T,
    pub k2: T,
    pub k3: T,
    /// Disturbance feed-through; 1 cancels `d̂` exactly.
    pub kd: T,
    /// Reference gain; equal to `k1` for unit DC gain from `x₁ʳᵉᶠ` to `x₁`.
    pub k_ref: T,
}

/// Innovation gains of the disturbance-augmented observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverGains<T> {
    pub l1: T,
    pub l2: T,
    pub l3: T,
    pub ld: T,
}

/// Places the closed-loop poles `s³ + k₃s² + k₂s + k₁`.
pub fn place_controller_poles<T: Scalar>(poles: [Complex<T>; 3]) -> Result<ControllerGains<T>, ControlError> {
    check_stable(&poles)?;
    let c = char_poly_coeffs(&poles)?;
    Ok(ControllerGains { k1: c[2], k2: c[1], k3: c[0], kd: T::one(), k_ref: c[2] })
}

/// Places the observer error poles `s⁴ + l₁s³ + l₂s² + l₃s + l_d`.
pub fn place_observer_poles<T: Scalar>(poles: [Complex<T>; 4]) -> Result<ObserverGains<T>, ControlError> {
    check_stable(&poles)?;
    let c = char_poly_coeffs(&poles)?;
    Ok(ObserverGains { l1: c[0], l2: c[1], l3: c[2], ld: c[3] })
}

/// Controller poles of the worked example.
pub fn example_controller_poles<T: Scalar>() -> [Complex<T>; 3] {
    [
        Complex::new(T::lit(-6.06), T::zero()),
        Complex::new(T::lit(-3.03), T::lit(5.25)),
        Complex::new(T::lit(-3.03), T::lit(-5.25)),
    ]
}

/// Observer poles of the worked example.
pub fn example_observer_poles<T: Scalar>() -> [Complex<T>; 4] {
    [
        Complex::new(T::lit(-1.31), T::zero()),
        Complex::new(T::lit(-0.80), T::zero()),
        Complex::new(T::lit(-0.54), T::lit(0.63)),
        Complex::new(T::lit(-0.54), T::lit(-0.63)),
    ]
}

/// Gains of the controller-observer; the compensator state `η` lives in the
/// simulation state vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerObserver<T> {
    pub controller: ControllerGains<T>,
    pub observer: ObserverGains<T>,
}

impl<T: Scalar> ControllerObserver<T> {
    pub fn new(controller: ControllerGains<T>, observer: ObserverGains<T>) -> Self {
        Self { controller, observer }
    }

    pub fn from_poles(ctrl: [Complex<T>; 3], obs: [Complex<T>; 4]) -> Result<Self, ControlError> {
        Ok(Self { controller: place_controller_poles(ctrl)?, observer: place_observer_poles(obs)? })
    }

    /// The worked example's pole sets.
    pub fn example() -> Self {
        Self::from_poles(example_controller_poles(), example_observer_poles())
            .expect("example poles are stable and conjugate-closed")
    }

    /// `u = −Kη + k·x₁ʳᵉᶠ`.
    #[inline]
    pub fn control(&self, eta: &[T], x1_ref: T) -> T {
        let k = &self.controller;
        -(k.k1 * eta[0] + k.k2 * eta[1] + k.k3 * eta[2] + k.kd * eta[3]) + k.k_ref * x1_ref
    }

    /// Returns `u` and writes `η̇` driven by the innovation `y_v − x̂₁`.
    #[inline]
    pub fn compensator_step(&self, eta: &[T], y_v_fed: T, x1_ref: T, eta_dot: &mut [T]) -> T {
        let u = self.control(eta, x1_ref);
        let l = &self.observer;
        let innov = y_v_fed - eta[0];
        eta_dot[0] = eta[1] + l.l1 * innov;
        eta_dot[1] = eta[2] + l.l2 * innov;
        eta_dot[2] = u + eta[3] + l.l3 * innov;
        eta_dot[3] = l.ld * innov;
        u
    }

    /// State matrix of `ẋ = Ax + B(u + d)` under `u = −Kx − d`.
    pub fn controller_matrix(&self) -> [[T; 3]; 3] {
        let (z, o) = (T::zero(), T::one());
        let k = &self.controller;
        [[z, o, z], [z, z, o], [-k.k1, -k.k2, -k.k3]]
    }

    /// Error dynamics matrix of `(x − x̂₁, x₂ − x̂₂, x₃ − x̂₃, d − d̂)`.
    pub fn observer_error_matrix(&self) -> [[T; 4]; 4] {
        let (z, o) = (T::zero(), T::one());
        let l = &self.observer;
        [[-l.l1, o, z, z], [-l.l2, z, o, z], [-l.l3, z, z, o], [-l.ld, z, z, z]]
    }
}

/// `u = b(η, ȳ, ȳ_v, t) + s(t/ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectedControlLaw<T, W> {
    pub base: ControllerObserver<T>,
    pub signal: W,
    epsilon: T,
}

impl<T: Scalar, W: Waveform<T>> InjectedControlLaw<T, W> {
    pub fn new(base: ControllerObserver<T>, signal: W, epsilon: T) -> Result<Self, ControlError> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(ControlError::BadPeriod(epsilon.as_f64()));
        }
        Ok(Self { base, signal, epsilon })
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// `s(t/ε)`.
    #[inline]
    pub fn injection(&self, t: T) -> T {
        self.signal.eval(t / self.epsilon)
    }

    /// `u_base + s(t/ε)`.
    #[inline]
    pub fn injected_control(&self, t: T, u_base: T) -> T {
        u_base + self.injection(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::PeriodicSignal;

    fn real(v: f64) -> Complex<f64> {
        Complex::new(v, 0.0)
    }

    #[test]
    fn triple_pole_at_minus_one() {
        let g = place_controller_poles([real(-1.0); 3]).unwrap();
        assert_eq!((g.k1, g.k2, g.k3), (1.0, 3.0, 3.0));
        assert_eq!(g.kd, 1.0);
        assert_eq!(g.k_ref, g.k1);
        let o = place_observer_poles([real(-1.0); 4]).unwrap();
        assert_eq!((o.l1, o.l2, o.l3, o.ld), (4.0, 6.0, 4.0, 1.0));
    }

    #[test]
    fn example_gains_match_hand_expansion() {
        let co = ControllerObserver::<f64>::example();
        let c = co.controller;
        assert!((c.k3 - 12.12).abs() < 1e-12);
        // (s + 6.06)(s² + 6.06 s + 36.7434)
        assert!((c.k2 - (36.7434 + 6.06 * 6.06)).abs() < 1e-12);
        assert!((c.k1 - 6.06 * 36.7434).abs() < 1e-10);
        let o = co.observer;
        // (s + 1.31)(s + 0.80)(s² + 1.08 s + 0.6885)
        assert!((o.l1 - 3.19).abs() < 1e-12);
        assert!((o.l2 - 4.015_3).abs() < 1e-12);
        assert!((o.l3 - (2.11 * 0.6885 + 1.048 * 1.08)).abs() < 1e-12);
        assert!((o.ld - 1.31 * 0.80 * 0.6885).abs() < 1e-12);
    }

    #[test]
    fn rejects_unpaired_complex_poles() {
        let err = place_controller_poles([real(-1.0), Complex::new(-1.0, 2.0), Complex::new(-1.0, 3.0)]).unwrap_err();
        assert_eq!(err, ControlError::NotConjugateClosed);
    }

    #[test]
    fn rejects_right_half_plane() {
        assert!(matches!(
            place_controller_poles([real(1.0), real(-1.0), real(-2.0)]),
            Err(ControlError::Unstable { .. })
        ));
        // unstable sets can still be expanded
        assert_eq!(char_poly_coeffs(&[real(1.0), real(1.0)]).unwrap(), vec![-2.0, 1.0]);
    }

    #[test]
    fn compensator_equilibrium_and_innovation_path() {
        let co = ControllerObserver::<f64>::example();
        let mut eta_dot = [0.0; 4];
        let u = co.compensator_step(&[0.0; 4], 0.0, 0.0, &mut eta_dot);
        assert_eq!(u, 0.0);
        assert_eq!(eta_dot, [0.0; 4]);
        let u = co.compensator_step(&[0.0; 4], 1.0, 0.0, &mut eta_dot);
        assert_eq!(u, 0.0);
        let l = co.observer;
        assert_eq!(eta_dot, [l.l1, l.l2, l.l3, l.ld]);
    }

    #[test]
    fn steady_state_holds_reference_and_disturbance() {
        let co = ControllerObserver::<f64>::example();
        let (r, d) = (1.7, -2.0);
        let mut eta_dot = [0.0; 4];
        let u = co.compensator_step(&[r, 0.0, 0.0, d], r, r, &mut eta_dot);
        assert!((u + d).abs() < 1e-12);
        assert!(eta_dot.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn injected_control_adds_signal() {
        let co = ControllerObserver::<f64>::example();
        let law = InjectedControlLaw::new(co, PeriodicSignal::square(1.0), 1e-3).unwrap();
        assert_eq!(law.injected_control(0.0, 0.0), 1.0);
        let silent = InjectedControlLaw::new(co, PeriodicSignal::square(0.0), 1e-3).unwrap();
        assert_eq!(silent.injected_control(0.3, 0.7), 0.7);
        assert!(InjectedControlLaw::new(co, PeriodicSignal::square(1.0), 0.0).is_err());
    }
}
