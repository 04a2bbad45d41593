use nesterov_flow::diagnostics::{
    decade_arclength_points, decade_arclength_table, rate_fit, rate_fit_points, weighted_divergence_table, DiagnosticsOptions,
    DiagnosticsReport, RatePoint,
};
use nesterov_flow::integrator::{integrate_nesterov, run_nesterov, IntegratorConfig, LegPlan};
use nesterov_flow::oracles::QuadraticSpec;
use nesterov_flow::table::{diag_tsv, events_tsv, load_events, load_trajectory, quantized, Loaded};
use nesterov_flow::{Error, PotentialSpec};

#[test]
fn rate_fit_needs_two_decades() {
    let pts: Vec<RatePoint> = (0..=40)
        .map(|i| {
            let t = 100.0 * 10f64.powf(i as f64 / 40.0);
            RatePoint { t, f_low: 1.0 / (t * t), f_high: 1.0 / (t * t), r_high: None }
        })
        .collect();
    let err = rate_fit_points(&pts, 1e2, 1e5).unwrap_err();
    assert!(matches!(err, Error::InsufficientSpan(_)), "{err}");
    assert!(matches!(rate_fit_points(&pts, 1e6, 1e7), Err(Error::InsufficientSpan(_))));
}

#[test]
fn rate_fit_recovers_known_constants() {
    // f = 3/(t² ln t) on [10², 10⁴]
    let pts: Vec<RatePoint> = (0..=200)
        .map(|i| {
            let t = 100.0 * 10f64.powf(i as f64 / 100.0);
            let f = 3.0 / (t * t * t.ln());
            RatePoint { t, f_low: f, f_high: f, r_high: Some(t.ln() / (t * t)) }
        })
        .collect();
    let rc = rate_fit_points(&pts, 1e2, 1e4).unwrap();
    assert!((rc.c_f_lower - 3.0).abs() < 1e-12);
    assert!((rc.c_f_upper - 3.0 / 100f64.ln()).abs() < 1e-12);
    assert!((rc.c_r_fit.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(rc.lower_by_decade.iter().map(|d| d.0).collect::<Vec<_>>(), vec![2, 3]);
    assert!(rc.lower_variation().unwrap() < 1e-12);
}

#[test]
fn decade_increments_of_a_log_log_curve() {
    // s(t) = ln ln t: increments ln((k+1)/k), scaled increments → ln 10
    let pts: Vec<(f64, f64)> = (0..=500).map(|i| 10f64.powf(1.0 + i as f64 / 100.0)).map(|t| (t, t.ln().ln())).collect();
    let inc = decade_arclength_points(&pts);
    assert_eq!(inc.iter().map(|d| d.k).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    for d in &inc {
        let k = d.k as f64;
        assert!((d.increment - ((k + 1.0) / k).ln()).abs() < 1e-12);
    }
    assert!(inc.windows(2).all(|w| w[1].scaled > w[0].scaled));
    assert!(decade_arclength_points(&pts[..50]).is_empty());
}

/// Finite-length and integrable cases: the quadratic contrasts to the
/// pathological potential.
#[test]
fn quadratic_trajectory_has_summable_increments() {
    let spec = PotentialSpec::Quadratic(QuadraticSpec::diagonal(&[1.0]).unwrap());
    let traj = integrate_nesterov(&spec, &[1.0], &IntegratorConfig::default().with_horizon(1e3)).unwrap();
    let inc = decade_arclength_table(&traj);
    let last = inc.iter().find(|d| d.k == 2).unwrap().increment;
    let prev = inc.iter().find(|d| d.k == 1).unwrap().increment;
    assert!(last / prev <= 0.5, "{last} / {prev}");
    let w = weighted_divergence_table(&traj, &spec);
    let at = |k: i32| w.rows.iter().find(|r| r.k == k).unwrap().weighted_f;
    assert!(at(3) - at(2) < 0.01 * at(3), "∫τf keeps growing: {} → {}", at(2), at(3));
}

#[test]
fn short_run_skips_the_rate_fit() {
    let spec = PotentialSpec::canonical();
    let cfg = IntegratorConfig::default().with_horizon(500.0);
    let traj = run_nesterov(&spec, &[0.04, 0.02], &cfg, LegPlan::default()).unwrap().trajectory;
    assert!(matches!(rate_fit(&traj, &spec, 1e2, 5e2), Err(Error::InsufficientSpan(_))));
    let rep = DiagnosticsReport::compute(&traj, &spec, &DiagnosticsOptions::default());
    assert!(rep.c_f_upper.is_none());
    assert!(rep.skipped.iter().any(|s| s.starts_with("rate_fit: insufficient span")), "{:?}", rep.skipped);
    assert!(rep.kappa.is_some() && rep.t_rad_empirical.is_some());
}

#[test]
fn report_survives_the_table_round_trip() {
    let spec = PotentialSpec::canonical();
    let run = run_nesterov(&spec, &[0.04, 0.02], &IntegratorConfig::default().with_horizon(1e4), LegPlan::default()).unwrap();
    let traj = run.trajectory;
    let Loaded::Full { spec: read_spec, trajectory: mut back } = load_trajectory(&diag_tsv(&traj, &spec)).unwrap() else {
        panic!("diag table read back as series");
    };
    assert_eq!(read_spec.as_ref(), Some(&spec));
    back.events = load_events(&events_tsv(&traj)).unwrap();
    let opts = DiagnosticsOptions::default();
    let direct = DiagnosticsReport::compute(&quantized(&traj), &spec, &opts);
    let reread = DiagnosticsReport::compute(&back, &spec, &opts);
    assert_eq!(direct.to_key_values(), reread.to_key_values());
    assert_eq!(direct, reread);
    // rounding to twelve digits barely moves the numbers
    let raw = DiagnosticsReport::compute(&traj, &spec, &opts);
    let (a, b) = (raw.kappa.unwrap(), reread.kappa.unwrap());
    assert!((a - b).abs() < 1e-10 * a);
}
