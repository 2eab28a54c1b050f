//! High-frequency signal injection for nonlinear SISO systems.
//!
//! Superimposing a fast zero-mean periodic signal `s(t/ε)` on the control of
//! `ẋ = f(x) + g(x)u, y = h(x)` makes the output carry a ripple
//! `ε·L_g h(x)·S(t/ε)`, where `S` is the zero-mean primitive of `s`. The ripple
//! amplitude is a new "virtual" measurement `y_v = L_g h(x)` that can be fed to
//! a controller once demodulated.
//!
//! The crate provides:
//!
//! - [`sim`]: fixed-step RK4 integration of piecewise-smooth hybrid systems.
//! - [`signal`]: injection waveforms, their primitives and moments.
//! - [`plant`]: affine plants, the virtual output and the third-order example.
//! - [`control`]: pole placement and the observer-based compensator.
//! - [`demod`]: sliding-window estimators for `ȳ` and `ȳ_v`.
//! - [`noise`]: band-limited white noise and estimator noise floors.
//! - [`closed_loop`]: the example plant wired to its compensator.
//! - [`averaging`]: paired injected/averaged runs and convergence-order fits.
//!
//! Every numeric routine is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the common double-precision instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod averaging;
pub mod closed_loop;
pub mod control;
pub mod demod;
pub mod noise;
pub mod plant;
pub mod scalar;
pub mod signal;
pub mod sim;

pub use scalar::Scalar;

pub type Trajectory64 = sim::Trajectory<f64>;
pub type TimeGrid64 = sim::TimeGrid<f64>;
pub type PeriodicSignal64 = signal::PeriodicSignal<f64>;
pub type ExamplePlant64 = plant::ExamplePlant<f64>;
pub type ControllerObserver64 = control::ControllerObserver<f64>;
pub type Demodulator64 = demod::Demodulator<f64>;
pub type DemodConfig64 = demod::DemodConfig<f64>;
pub type ExampleLoop64 = closed_loop::ExampleLoop<f64>;
pub type PairedRun64 = averaging::PairedRun<f64>;

pub type Trajectory32 = sim::Trajectory<f32>;
pub type PeriodicSignal32 = signal::PeriodicSignal<f32>;
