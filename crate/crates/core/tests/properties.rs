use hfi_core::demod::{Carrier, DemodConfig, Demodulator, RECOMPUTE_EVERY};
use hfi_core::plant::{virtual_output, virtual_output_fd, ExamplePlant};
use hfi_core::signal::{PeriodicSignal, Shape, Waveform};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = Shape> {
    prop_oneof![Just(Shape::Square), Just(Shape::Sine)]
}

fn signal() -> impl Strategy<Value = PeriodicSignal<f64>> {
    (shape(), 0.1..5.0_f64, 0.0..1.0_f64).prop_map(|(sh, a, p)| PeriodicSignal::with_phase(sh, a, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn primitive_differentiates_to_signal(sig in signal(), sigma in 0.0..1.0_f64) {
        let d = 1e-6;
        let slope = (sig.primitive(sigma + d) - sig.primitive(sigma - d)) / (2.0 * d);
        // away from square-wave switches the central difference is exact up to roundoff
        let near_switch = |x: f64| {
            let f = (x + sig.phase_shift()).rem_euclid(0.5);
            (f - 0.25).abs() < 2.0 * d
        };
        if !(sig.shape() == Shape::Square && near_switch(sigma)) {
            prop_assert!((slope - sig.eval(sigma)).abs() < 1e-6 * sig.amplitude().max(1.0),
                "S'={slope} s={}", sig.eval(sigma));
        }
    }

    #[test]
    fn signal_and_primitive_are_periodic(sig in signal(), sigma in -3.0..3.0_f64, k in -5i32..5) {
        let shifted = sigma + k as f64;
        let tol = 1e-12 * sig.amplitude().max(1.0) * (1.0 + shifted.abs());
        prop_assert!((sig.primitive(sigma) - sig.primitive(shifted)).abs() < tol);
        let sq_edge = sig.shape() == Shape::Square
            && ((sigma + sig.phase_shift()).rem_euclid(0.5) - 0.25).abs() < 1e-9;
        if !sq_edge {
            prop_assert!((sig.eval(sigma) - sig.eval(shifted)).abs() < tol);
        }
    }

    #[test]
    fn signal_and_primitive_have_zero_mean(sig in signal()) {
        prop_assert!(sig.verify_zero_mean(4000, 1e-9 * sig.amplitude()).is_ok());
    }

    #[test]
    fn finite_difference_virtual_output_matches_closure(
        x in proptest::array::uniform3(-10.0..10.0_f64)
    ) {
        let p = ExamplePlant::<f64>::undisturbed();
        prop_assert!((virtual_output_fd(&p, &x) - virtual_output(&p, &x)).abs() < 1e-6);
    }

    #[test]
    fn constant_measurement_gives_zero_virtual_output(c in -100.0..100.0_f64) {
        let cfg = DemodConfig::new(1e-3, 10, 1e-5, PeriodicSignal::square(1.0), Carrier::Signal);
        let mut d = Demodulator::new(cfg).unwrap();
        let mut last = Default::default();
        for k in 0..2001 {
            last = d.push_sample(k as f64 * 1e-5, c).unwrap();
        }
        let e: hfi_core::demod::Estimate<f64> = last;
        prop_assert!((e.ybar.unwrap() - c).abs() < 1e-9 * c.abs().max(1.0));
        prop_assert!(e.yv.unwrap().abs() < 1e-9 * c.abs().max(1.0) / 1e-3);
        prop_assert!(e.yv_simple.unwrap().abs() < 1e-9 * c.abs().max(1.0) / 1e-3);
    }

    #[test]
    fn pure_ripple_recovers_its_amplitude(v in -50.0..50.0_f64, shape in shape()) {
        let eps = 1e-3;
        let sig = PeriodicSignal::new(shape, 1.0);
        let cfg = DemodConfig::new(eps, 10, 1e-5, sig, Carrier::Signal);
        let mut d = Demodulator::new(cfg).unwrap();
        let mut est = Default::default();
        for k in 0..2500 {
            let y = eps * v * d.carrier_at(k);
            est = d.push_sample(k as f64 * 1e-5, y).unwrap();
        }
        let e: hfi_core::demod::Estimate<f64> = est;
        prop_assert!((e.yv.unwrap() - v).abs() < 1e-9);
        prop_assert!((e.yv_simple.unwrap() - v).abs() < 1e-9);
        prop_assert!(e.ybar.unwrap().abs() < 1e-9);
    }
}

#[test]
fn ramp_mean_lags_by_half_window() {
    let (eps, n, h) = (1e-3, 10usize, 1e-5);
    let cfg = DemodConfig::new(eps, n, h, PeriodicSignal::square(1.0), Carrier::Signal);
    let mut d = Demodulator::new(cfg).unwrap();
    for k in 0..5000 {
        let t = k as f64 * h;
        let e = d.push_sample(t, t).unwrap();
        if let Some(yb) = e.ybar {
            assert!((yb - (t - n as f64 * eps / 2.0)).abs() < 1e-12, "t={t} ybar={yb}");
        }
    }
}

#[test]
fn simple_form_is_worse_on_a_sloped_mean() {
    let (eps, h) = (1e-3, 1e-5);
    let cfg = DemodConfig::new(eps, 10, h, PeriodicSignal::square(1.0), Carrier::Signal);
    let mut d = Demodulator::new(cfg).unwrap();
    let (mut err13, mut err14) = (0.0_f64, 0.0_f64);
    for k in 0..6000 {
        let t = k as f64 * h;
        let y = 3.0 * t + eps * 2.0 * d.carrier_at(k);
        let e = d.push_sample(t, y).unwrap();
        if let (Some(a), Some(b)) = (e.yv, e.yv_simple) {
            err13 = err13.max((a - 2.0).abs());
            err14 = err14.max((b - 2.0).abs());
        }
    }
    assert!(err14 > err13, "simple {err14} vs delayed {err13}");
}

#[test]
fn running_sums_stay_consistent_over_a_million_pushes() {
    let cfg = DemodConfig::new(1e-3, 10, 1e-5, PeriodicSignal::square(1.0), Carrier::Primitive);
    let mut d = Demodulator::new(cfg).unwrap();
    let mut worst = 0.0_f64;
    for k in 0..1_000_000usize {
        let t = k as f64 * 1e-5;
        let y = 1.0 + (3.1 * t).sin() + 1e-3 * (0.2 * t).cos() * d.carrier_at(k);
        d.push_sample(t, y).unwrap();
        // check just before each resynchronization, where drift is largest
        if (k + 2) % RECOMPUTE_EVERY == 0 {
            let (a, b) = (d.window_sums(), d.recompute_window_sums());
            for (x, y) in [(a.y, b.y), (a.residual, b.residual), (a.product, b.product)] {
                worst = worst.max((x - y).abs() / y.abs().max(1.0));
            }
        }
    }
    assert!(worst < 1e-9, "relative drift {worst}");
}

#[test]
fn whole_period_mean_of_signal_vanishes() {
    for shape in [Shape::Square, Shape::Sine] {
        let sig = PeriodicSignal::new(shape, 1.0);
        let per = 400;
        for start in [0usize, 17, 133, 399] {
            let mean: f64 =
                (start..start + 3 * per).map(|j| sig.eval_held(j as f64 / per as f64, 1.0 / per as f64)).sum::<f64>()
                    / (3 * per) as f64;
            assert!(mean.abs() < 1e-12, "{shape:?} start {start}: {mean}");
        }
    }
}
