use hfi_xp::output::{emit_csv, read_csv};
use hfi_xp::scenario::{compute_metrics, run_scenario, COLUMNS};
use hfi_xp::Scenario;

#[test]
fn three_step_run_has_four_rows() {
    let sc = Scenario {
        t_end: 3e-5,
        stride: 1,
        disturbance: vec![],
        ref_start: None,
        epsilons: vec![],
        ..Scenario::paper()
    };
    let res = run_scenario(&sc).unwrap();
    assert_eq!(res.columns.rows(), 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.csv");
    emit_csv(&res, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
}

#[test]
fn worked_example_round_trips_metrics_exactly() {
    let sc = Scenario::paper();
    let res = run_scenario(&sc).unwrap();
    assert_eq!(res.columns.rows(), 20001);
    for c in &res.columns.data {
        assert_eq!(c.len(), 20001);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("paper.csv");
    emit_csv(&res, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back.names, res.columns.names);
    let again = compute_metrics(&back, &sc);
    let bits = |m: &hfi_xp::Metrics| {
        [m.sup_tracking_error, m.tracking_error_prior, m.tracking_error_final, m.sup_yv_error, m.final_x1]
            .map(f64::to_bits)
    };
    assert_eq!(bits(&again), bits(&res.metrics));
    assert_eq!(again.settling_time.map(f64::to_bits), res.metrics.settling_time.map(f64::to_bits));
    assert_eq!(again.rows, res.metrics.rows);
}

#[test]
fn worked_example_rejects_disturbance_and_tracks_ramp() {
    let res = run_scenario(&Scenario::paper()).unwrap();
    let m = &res.metrics;
    // x1 returns to the reference before the ramp starts
    assert!(m.settling_time.is_some(), "{m:?}");
    let t = res.columns.get("t").unwrap();
    let x1 = res.columns.get("x1").unwrap();
    let k = t.iter().position(|&v| v >= 13.5).unwrap();
    assert!(x1[k].abs() < 0.04);
    assert!(m.tracking_error_final <= 1.05 * m.tracking_error_prior + 1e-3);
}
