//! The closed forms checked against independent numerics: direct quadrature
//! for E₁, Bessel's integral for Jₙ, finite differences for the ODEs.

use std::f64::consts::PI;

use nesterov_flow::integrator::{integrate_gradient_flow, integrate_nesterov, IntegratorConfig, SampleOrigin};
use nesterov_flow::oracles::bessel::{j0, j1, j1_over_x, j2, j2_over_x};
use nesterov_flow::oracles::{
    bessel_j, gradient_flow_hit_time, gradient_flow_hit_time_numeric, quadratic_arclength, quadratic_nesterov_closed_form,
    radial_eps0_reduction, QuadraticOracle, QuadraticSpec,
};
use nesterov_flow::potential::{exp_integral_e1, radial_value, PotentialSpec, RADIAL_SEAM};

/// Composite Simpson on `[lo, hi]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `∫_R^∞ e^{−v}/v dv` with `v = R + u`, `u = w²` to tame the endpoint, tail cut at `e^{−60}`.
fn e1_by_quadrature(r: f64) -> f64 {
    simpson(|w| 2.0 * w * (-(r + w * w)).exp() / (r + w * w), 0.0, 60f64.sqrt(), 200_000)
}

#[test]
fn e1_matches_direct_quadrature() {
    for &r in &[0.05, 0.3, 0.999, 1.0, 1.001, 2.0, 4.5, 10.0, 17.0, 27.6] {
        let want = e1_by_quadrature(r);
        let got = exp_integral_e1(r).unwrap();
        assert!(((got - want) / want).abs() < 1e-11, "R={r}: {got:e} vs {want:e}");
    }
}

#[test]
fn e1_reference_values() {
    // tabulated: E₁(1) = 0.219383934395520, E₁(2) = 0.048900510708061
    assert!((exp_integral_e1(1.0).unwrap() - 0.219_383_934_395_520).abs() < 1e-14);
    assert!((exp_integral_e1(2.0).unwrap() - 0.048_900_510_708_061).abs() < 1e-14);
    assert!((radial_value(RADIAL_SEAM) - 0.048_900_510_708_061).abs() < 1e-14);
}

/// `Jₙ(x) = (1/π) ∫₀^π cos(nτ − x sin τ) dτ`; the trapezoid rule is
/// spectrally accurate for this periodic integrand.
fn bessel_by_integral(n: u32, x: f64) -> f64 {
    let m = 4000;
    let h = PI / m as f64;
    let g = |tau: f64| (n as f64 * tau - x * tau.sin()).cos();
    let mut s = 0.5 * (g(0.0) + g(PI));
    for i in 1..m {
        s += g(i as f64 * h);
    }
    s * h / PI
}

#[test]
fn bessel_matches_integral_representation_in_every_regime() {
    let mut x = 0.0;
    while x <= 80.0 {
        for n in 0..=2 {
            let got = bessel_j(n, x).unwrap();
            let want = bessel_by_integral(n, x);
            assert!((got - want).abs() < 2e-13, "J{n}({x}) = {got:e}, integral {want:e}");
        }
        x += 0.173;
    }
    // straddle the regime switches
    for &x in &[8.0 - 1e-9, 8.0 + 1e-9, 25.0 - 1e-9, 25.0 + 1e-9] {
        for n in 0..=2 {
            assert!((bessel_j(n, x).unwrap() - bessel_by_integral(n, x)).abs() < 2e-13);
        }
    }
}

#[test]
fn bessel_zeros() {
    assert!(j0(2.404_825_557_695_773).abs() < 1e-14);
    assert!(j1(3.831_705_970_207_512).abs() < 1e-14);
    assert!(j1(7.015_586_669_815_619).abs() < 1e-14);
    assert!(j2(5.135_622_301_840_683).abs() < 1e-14);
}

#[test]
fn bessel_three_term_recurrence() {
    for i in 1..2000 {
        let x = i as f64 * 0.05;
        let lhs = j0(x) + j2(x);
        let rhs = 2.0 * j1(x) / x;
        assert!((lhs - rhs).abs() < 1e-13, "x={x}");
        assert!((j1_over_x(x) - j1(x) / x).abs() < 1e-14);
        assert!((j2_over_x(x) - j2(x) / x).abs() < 1e-14);
    }
    assert_eq!(j1_over_x(0.0), 0.5);
    assert_eq!(j2_over_x(0.0), 0.0);
    assert!(bessel_j(3, 1.0).is_err());
    assert!(bessel_j(0, -1.0).is_err());
}

#[test]
fn closed_form_solves_the_ode() {
    let q = QuadraticSpec::diagonal(&[1.0, 4.0, 0.3]).unwrap();
    let x0 = [1.0, -2.0, 0.5];
    let h = 1e-4;
    for i in 1..200 {
        let t = 0.25 * i as f64;
        let (x, v) = quadratic_nesterov_closed_form(&q, &x0, t).unwrap();
        let (xp, vp) = quadratic_nesterov_closed_form(&q, &x0, t + h).unwrap();
        let (xm, vm) = quadratic_nesterov_closed_form(&q, &x0, t - h).unwrap();
        for k in 0..3 {
            let vel_fd = (xp[k] - xm[k]) / (2.0 * h);
            assert!((vel_fd - v[k]).abs() < 1e-8, "t={t} velocity");
            let acc = (vp[k] - vm[k]) / (2.0 * h);
            let lambda = [1.0, 4.0, 0.3][k];
            let residual = acc + 3.0 / t * v[k] + lambda * x[k];
            assert!(residual.abs() < 1e-7, "t={t} k={k} residual {residual:e}");
        }
    }
    let (x, v) = quadratic_nesterov_closed_form(&q, &x0, 0.0).unwrap();
    assert_eq!(x, x0.to_vec());
    assert!(v.iter().all(|c| *c == 0.0));
}

#[test]
fn zero_eigenvalue_mode_stays_put() {
    let q = QuadraticSpec::diagonal(&[0.0, 1.0]).unwrap();
    for &t in &[0.0, 1.0, 10.0, 1e4] {
        let (x, v) = quadratic_nesterov_closed_form(&q, &[0.7, 1.0], t).unwrap();
        assert_eq!(x[0], 0.7);
        assert_eq!(v[0], 0.0);
    }
}

#[test]
fn rotated_matrix_matches_diagonal_oracle() {
    // Q = R diag(1, 4) Rᵀ with a 30° rotation
    let (c, s) = (PI / 6.0).sin_cos();
    let (c, s) = (s, c);
    let q = vec![c * c + 4.0 * s * s, (1.0 - 4.0) * c * s, (1.0 - 4.0) * c * s, s * s + 4.0 * c * c];
    let rotated = QuadraticSpec::new(2, q).unwrap();
    let diag = QuadraticSpec::diagonal(&[1.0, 4.0]).unwrap();
    let x0 = [0.3, -1.2];
    let y0 = [c * x0[0] + s * x0[1], -s * x0[0] + c * x0[1]];
    for &t in &[0.5, 3.0, 17.0, 90.0] {
        let (x, _) = quadratic_nesterov_closed_form(&rotated, &x0, t).unwrap();
        let (y, _) = quadratic_nesterov_closed_form(&diag, &y0, t).unwrap();
        let back = [c * y[0] - s * y[1], s * y[0] + c * y[1]];
        assert!((x[0] - back[0]).abs() < 1e-13 && (x[1] - back[1]).abs() < 1e-13, "t={t}");
    }
}

#[test]
fn closed_form_agrees_with_integration_on_a_non_diagonal_quadratic() {
    let q = QuadraticSpec::new(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
    let spec = PotentialSpec::Quadratic(q.clone());
    let cfg = IntegratorConfig::default().with_horizon(30.0);
    let traj = integrate_nesterov(&spec, &[1.0, 0.0], &cfg).unwrap();
    let oracle = QuadraticOracle::new(&q, &[1.0, 0.0]).unwrap();
    for s in &traj.samples {
        let (x, v) = oracle.state_at(s.t);
        for k in 0..2 {
            assert!((x[k] - s.x[k]).abs() < 1e-9, "t={}", s.t);
            assert!((v[k] - s.v[k]).abs() < 1e-9, "t={}", s.t);
        }
    }
}

#[test]
fn quadratic_arclength_is_self_consistent() {
    let q = QuadraticSpec::diagonal(&[1.0]).unwrap();
    let h = 50.0;
    let once = quadratic_arclength(&q, &[1.0], h).unwrap();
    let twice = quadratic_arclength(&q, &[1.0], 2.0 * h).unwrap();
    assert!(once.value.is_finite() && once.value > 0.0);
    assert!(twice.value >= once.value);
    assert!(twice.value - once.value <= once.tail_bound, "{} > {}", twice.value - once.value, once.tail_bound);
    // against Simpson on the closed-form speed
    let oracle = QuadraticOracle::new(&q, &[1.0]).unwrap();
    let direct = simpson(|t| oracle.speed(t), 0.0, h, 400_000);
    assert!((direct - once.value).abs() < 1e-9);
}

#[test]
fn gradient_flow_hit_time_matches_integration() {
    for &r0 in &[RADIAL_SEAM, 0.05, 1e-3, 1e-6] {
        let exact = gradient_flow_hit_time(r0).unwrap();
        let numeric = gradient_flow_hit_time_numeric(r0, 1e-14 * r0, 1e-12).unwrap();
        let remaining = gradient_flow_hit_time(1e-14 * r0).unwrap();
        assert!((numeric + remaining - exact).abs() < 1e-9 * exact, "r0={r0}: {numeric} + {remaining} vs {exact}");
    }
    assert!((gradient_flow_hit_time(RADIAL_SEAM).unwrap() - 0.406_005_849_709_838_5).abs() < 1e-15);
}

#[test]
fn gradient_flow_on_a_quadratic_decays_exponentially() {
    let spec = PotentialSpec::Quadratic(QuadraticSpec::diagonal(&[1.0, 3.0]).unwrap());
    let mut cfg = IntegratorConfig::default().with_horizon(5.0);
    cfg.stop_radius = 0.0;
    let traj = integrate_gradient_flow(&spec, &[1.0, 1.0], &cfg).unwrap();
    for s in &traj.samples {
        assert!((s.x[0] - (-s.t).exp()).abs() < 1e-9);
        assert!((s.x[1] - (-3.0 * s.t).exp()).abs() < 1e-9);
    }
}

#[test]
fn ray_reduction_matches_the_planar_flow_at_zero_eps() {
    let a = 0.02;
    let spec = PotentialSpec::pathological(a, 0.0).unwrap();
    // each passage through the origin, where F″ is singular, costs digits:
    // at the default tolerance the two drift apart by ~1e-3 relative by t=25
    let cfg = IntegratorConfig::default().with_horizon(25.0).with_tolerances(1e-13, 1e-20);
    let planar = integrate_nesterov(&spec, &[2.0 * a, a], &cfg).unwrap();
    let ray = radial_eps0_reduction(a, &cfg).unwrap();
    let scheduled = |s: &&nesterov_flow::FlowState| s.t >= 1e-3 && s.origin == SampleOrigin::Schedule;
    let planar: Vec<_> = planar.samples.iter().filter(scheduled).collect();
    let ray: Vec<_> = ray.samples.iter().filter(scheduled).collect();
    assert_eq!(planar.len(), ray.len());
    for (p, r) in planar.iter().zip(&ray) {
        assert!((p.t - r.t).abs() < 1e-12 * p.t);
        // X(t) = ρ(t)·(2, 1)
        assert!((p.x[0] - 2.0 * r.x[0]).abs() < 1e-9 * a, "t={} planar {:e} ray {:e}", p.t, p.x[0], 2.0 * r.x[0]);
        assert!((p.x[1] - r.x[0]).abs() < 1e-9 * a, "t={}", p.t);
        assert_eq!(p.torque_integral, 0.0);
    }
}
