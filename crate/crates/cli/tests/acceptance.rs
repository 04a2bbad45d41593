//! One test per acceptance criterion; each prints a single PASS/FAIL line.
//!
//! The heavy runs share one lock: the machine may have a single core, and the
//! timed criteria must not compete with each other.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nesterov_flow::diagnostics::{
    decade_arclength_table, energy_monotonicity, kinetic_integral_residual, momentum_flatness, rate_fit, torque_balance,
    weighted_divergence_table,
};
use nesterov_flow::integrator::{
    estimate_kappa, integrate_gradient_flow, integrate_nesterov, run_nesterov, EventKind, IntegratorConfig, Leg, LegPlan,
    Trajectory,
};
use nesterov_flow::oracles::{gradient_flow_hit_time_numeric, QuadraticOracle, QuadraticSpec};
use nesterov_flow::potential::{radial_value, PotentialSpec, RADIAL_SEAM};

const X0: [f64; 2] = [0.04, 0.02];

fn heavy() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|p| p.into_inner())
}

/// Written to the stdout handle directly so the line shows even when the
/// harness captures the output of passing tests.
fn verdict(n: u32, name: &str, ok: bool, detail: String) {
    let line = format!("{} criterion {n:>2} {name}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
}

/// The canonical run to `t = 10⁵`, shared by several criteria.
fn fig2() -> &'static Trajectory {
    static RUN: OnceLock<Trajectory> = OnceLock::new();
    RUN.get_or_init(|| {
        let _g = heavy();
        run_nesterov(&PotentialSpec::canonical(), &X0, &IntegratorConfig::default(), LegPlan::default()).unwrap().trajectory
    })
}

fn t_rad(traj: &Trajectory) -> f64 {
    traj.events_of(EventKind::RadialEntry).last().expect("enters the radial region").t
}

fn t3j(s: &nesterov_flow::FlowState) -> f64 {
    s.t.powi(3) * (s.x[0] * s.v[1] - s.x[1] * s.v[0])
}

fn quadratic(lambda: &[f64]) -> (QuadraticSpec, PotentialSpec) {
    let q = QuadraticSpec::diagonal(lambda).unwrap();
    (q.clone(), PotentialSpec::Quadratic(q))
}

#[test]
fn criterion_01_torque_balance() {
    let spec = PotentialSpec::canonical();
    let cfg = IntegratorConfig::default().with_horizon(1e3);
    let (traj, elapsed) = {
        let _g = heavy();
        let clock = Instant::now();
        let traj = integrate_nesterov(&spec, &X0, &cfg).unwrap();
        (traj, clock.elapsed())
    };
    let (residual, kappa) = torque_balance(&traj, &spec, 1e3).unwrap();
    let ok = residual <= 1e-6 && elapsed <= Duration::from_secs(60);
    verdict(
        1,
        "torque balance",
        ok,
        format!(
            "residual {residual:.3e} (≤ 1e-6; {:.2e} relative to κ) over [t0, 1e3], Cartesian leg {:.1}s (≤ 60s), {} steps",
            residual / kappa,
            elapsed.as_secs_f64(),
            traj.steps
        ),
    );
}

#[test]
fn criterion_02_positive_angular_momentum() {
    let big = estimate_kappa(fig2(), 10.0, 100.0).unwrap();
    let small_spec = PotentialSpec::pathological(0.02, 1e-3).unwrap();
    let small_traj = {
        let _g = heavy();
        integrate_nesterov(&small_spec, &X0, &IntegratorConfig::default().with_horizon(1e2)).unwrap()
    };
    let small = estimate_kappa(&small_traj, 10.0, 100.0).unwrap();
    let ok = [big, small].iter().all(|k| k.mean > 0.0 && k.mean > 1e3 * k.std);
    verdict(
        2,
        "positive angular momentum",
        ok,
        format!(
            "eps=50: κ={:.6e} std={:.2e}; eps=1e-3: κ={:.6e} std={:.2e} (each > 1e3·std)",
            big.mean, big.std, small.mean, small.std
        ),
    );
}

#[test]
fn criterion_03_conservation_after_radial_entry() {
    let traj = fig2();
    let tr = t_rad(traj);
    let flat = momentum_flatness(traj, tr, 1e5).unwrap();
    // polar samples carry t³J = κ by construction; check that the reconstruction keeps it
    let kappa = estimate_kappa(traj, 10.0, 100.0).unwrap().mean;
    let polar = traj
        .samples
        .iter()
        .filter(|s| s.leg == Leg::Polar)
        .map(|s| (t3j(s) / kappa - 1.0).abs())
        .fold(0.0, f64::max);
    let cartesian = momentum_flatness(traj, tr, 1e2).unwrap();
    let ok = flat <= 1e-5 && polar <= 1e-5 && cartesian <= 1e-5;
    verdict(
        3,
        "conservation after radial entry",
        ok,
        format!("variation of t³J over [T_rad={tr:.6}, 1e5] {flat:.2e}; Cartesian part {cartesian:.2e}; polar reconstruction {polar:.1e} (each ≤ 1e-5)"),
    );
}

#[test]
fn criterion_04_quadratic_oracle() {
    let (q, spec) = quadratic(&[1.0, 4.0]);
    let x0 = [1.0, 1.0];
    let oracle = QuadraticOracle::new(&q, &x0).unwrap();
    let run = |rtol: f64, atol: f64| {
        let cfg = IntegratorConfig::default().with_horizon(50.0).with_tolerances(rtol, atol);
        let traj = integrate_nesterov(&spec, &x0, &cfg).unwrap();
        let err = traj
            .samples
            .iter()
            .map(|s| {
                let (x, _) = oracle.state_at(s.t);
                x.iter().zip(&s.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        (err, traj.steps as f64)
    };
    let _g = heavy();
    let (sup, steps) = run(1e-10, 1e-16);
    // halve the tolerance five times; error against work gives the order
    let pts: Vec<(f64, f64)> = (0..6).map(|i| run(1e-6 / 2f64.powi(i), 1e-12 / 2f64.powi(i))).map(|(e, n)| (n.ln(), e.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let order = -slope;
    let ok = sup <= 1e-6 && (order - 5.0).abs() <= 0.5;
    verdict(
        4,
        "quadratic oracle",
        ok,
        format!("sup position error {sup:.2e} (≤ 1e-6) in {steps} steps; observed order {order:.2} (5 ± 0.5)"),
    );
}

#[test]
fn criterion_05_lyapunov_monotonicity() {
    let (_, quad) = quadratic(&[1.0, 4.0]);
    let small = PotentialSpec::pathological(0.02, 1e-3).unwrap();
    let flat = PotentialSpec::pathological(0.02, 0.0).unwrap();
    let runs: Vec<(&str, Trajectory, PotentialSpec)> = {
        let _g = heavy();
        let short = IntegratorConfig::default().with_horizon(1e2);
        vec![
            ("quadratic", integrate_nesterov(&quad, &[1.0, 1.0], &short).unwrap(), quad.clone()),
            ("eps=1e-3", integrate_nesterov(&small, &X0, &short).unwrap(), small.clone()),
            ("eps=0", integrate_nesterov(&flat, &X0, &IntegratorConfig::default().with_horizon(20.0)).unwrap(), flat.clone()),
        ]
    };
    let canonical = PotentialSpec::canonical();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, traj, spec) in std::iter::once(("fig2", fig2(), &canonical)).chain(runs.iter().map(|(n, t, s)| (*n, t, s))) {
        let e = energy_monotonicity(traj, spec).unwrap();
        ok &= e.max_rise <= 1e-9 && e.max_excess <= 0.0;
        parts.push(format!("{name}: rise {:.1e}, excess {:.1e}", e.max_rise.max(0.0), e.max_excess));
    }
    let e0 = nesterov_flow::diagnostics::lyapunov_energy(&fig2().samples[0], &canonical);
    ok &= (e0 - 0.004).abs() < 1e-15;
    verdict(5, "Lyapunov monotonicity", ok, format!("ℰ(0)={e0:.6} for fig2; {}", parts.join("; ")));
}

#[test]
fn criterion_06_rate_bands() {
    let spec = PotentialSpec::canonical();
    let fit = rate_fit(fig2(), &spec, 1e2, 1e4).unwrap();
    let decades = rate_fit(fig2(), &spec, 1e2, 1e5).unwrap();
    let lows: Vec<f64> = decades.lower_by_decade.iter().filter(|d| (2..=4).contains(&d.0)).map(|d| d.1).collect();
    let (hi, lo) = (lows.iter().cloned().fold(f64::MIN, f64::max), lows.iter().cloned().fold(f64::MAX, f64::min));
    let variation = (hi - lo) / hi;
    let ok = fit.c_f_upper <= 0.004 * (1.0 + 1e-6) && fit.c_f_lower > 0.0 && lows.len() == 3 && variation < 0.5;
    verdict(
        6,
        "rate bands",
        ok,
        format!(
            "max t²f {:.4e} (≤ 0.004), min t²log(t)f {:.4e} (> 0) on [1e2, 1e4]; per-decade minima [{}] vary {:.1}% (< 50%)",
            fit.c_f_upper,
            fit.c_f_lower,
            lows.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", "),
            100.0 * variation
        ),
    );
}

#[test]
fn criterion_07_infinite_length_signature() {
    let inc = decade_arclength_table(fig2());
    let delta = |k: i32| inc.iter().find(|d| d.k == k).map(|d| d.increment);
    let positive = (0..=4).all(|k| delta(k).is_some_and(|d| d > 0.0));
    let scaled: Vec<f64> = (2..=4).filter_map(|k| delta(k).map(|d| d * k as f64)).collect();
    let spread = scaled.iter().cloned().fold(f64::MIN, f64::max) / scaled.iter().cloned().fold(f64::MAX, f64::min);

    let (_, quad) = quadratic(&[1.0]);
    let qtraj = {
        let _g = heavy();
        integrate_nesterov(&quad, &[1.0], &IntegratorConfig::default().with_horizon(1e3)).unwrap()
    };
    let qinc = decade_arclength_table(&qtraj);
    let ratios: Vec<f64> = qinc.windows(2).filter(|w| w[0].k >= 0).map(|w| w[1].increment / w[0].increment).collect();
    let ok = positive && scaled.len() == 3 && spread <= 2.0 && !ratios.is_empty() && ratios.iter().all(|r| *r <= 0.5);
    let deltas: Vec<f64> = (0..=4).filter_map(delta).collect();
    verdict(
        7,
        "infinite-length signature",
        ok,
        format!("Δ_0..4 = {deltas:.4?}; k·Δ_k for k=2..4 within factor {spread:.2} (≤ 2); quadratic decade ratios {ratios:.3?} (≤ 0.5)"),
    );
}

#[test]
fn criterion_08_weighted_divergence() {
    let spec = PotentialSpec::canonical();
    let table = weighted_divergence_table(fig2(), &spec);
    let reaches = table.rows.last().is_some_and(|r| r.k == 5);
    let residual = kinetic_integral_residual(&fig2().samples, &spec).unwrap();

    let (_, quad) = quadratic(&[1.0]);
    let qtraj = {
        let _g = heavy();
        integrate_nesterov(&quad, &[1.0], &IntegratorConfig::default().with_horizon(1e3)).unwrap()
    };
    let qt = weighted_divergence_table(&qtraj, &quad);
    let at = |k: i32| qt.rows.iter().find(|r| r.k == k).unwrap().weighted_f;
    let last_share = (at(3) - at(2)) / at(3);
    let ok = table.strictly_increasing && reaches && residual <= 1e-4 && last_share < 0.01;
    let wf: Vec<String> = table.rows.iter().map(|r| format!("{:.3e}", r.weighted_f)).collect();
    verdict(
        8,
        "weighted divergence signature",
        ok,
        format!(
            "∫τf at 10^k = [{}] (both partials strictly increasing: {}); 𝒦 residual {residual:.2e} (≤ 1e-4); quadratic last-decade share {:.2e} (< 1%)",
            wf.join(", "),
            table.strictly_increasing,
            last_share
        ),
    );
}

#[test]
fn criterion_09_gradient_flow_finite_time() {
    let exact = 3.0 * RADIAL_SEAM;
    let stop = 1e-14 * RADIAL_SEAM;
    let numeric = gradient_flow_hit_time_numeric(RADIAL_SEAM, stop, 1e-12).unwrap();
    // along the ray through (−0.6, 0.8) the perturbation never acts
    let x0 = [-0.6 * RADIAL_SEAM, 0.8 * RADIAL_SEAM];
    let cfg = IntegratorConfig { stop_radius: 1e-12, ..IntegratorConfig::default().with_horizon(1.0) };
    let traj = integrate_gradient_flow(&PotentialSpec::canonical(), &x0, &cfg).unwrap();
    let hit = traj.events_of(EventKind::MinimizerReached).next().map(|e| e.t);
    let length = traj.last().unwrap().arclength;
    let ok = (numeric - exact).abs() <= 1e-4 && hit.is_some_and(|h| (h - exact).abs() <= 1e-4) && (length - RADIAL_SEAM).abs() <= 1e-8;
    verdict(
        9,
        "gradient-flow finite time",
        ok,
        format!(
            "hit time {numeric:.10} (1-D), {:.10} (planar) vs 3e⁻² = {exact:.10}; path length {length:.12} vs e⁻² = {RADIAL_SEAM:.12}",
            hit.unwrap_or(f64::NAN)
        ),
    );
}

#[test]
fn criterion_10_potential_regularity() {
    let spec = PotentialSpec::canonical();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut fd_worst: f64 = 0.0;
    for _ in 0..10_000 {
        let r = 10f64.powf(rng.gen_range(-6.0..0.0));
        let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let x = [r * th.cos(), r * th.sin()];
        // a step relative to ‖x‖; a fixed 1e-7 swamps points with ‖x‖ ~ 1e-6
        let h = 1e-7 * r;
        let g = spec.gradient(&x).unwrap();
        let gn = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        for k in 0..2 {
            if k == 0 && [0.02, 0.04].iter().any(|s| (x[0] - s).abs() <= h) {
                continue;
            }
            let (mut xp, mut xm) = (x, x);
            xp[k] += h;
            xm[k] -= h;
            let fd = (spec.value(&xp).unwrap() - spec.value(&xm).unwrap()) / (2.0 * h);
            fd_worst = fd_worst.max((fd - g[k]).abs() / gn);
        }
    }
    let mut violations = 0;
    for _ in 0..100_000 {
        let s = if rng.gen_bool(0.5) { 1.0 } else { 10f64.powf(rng.gen_range(-8.0..-1.0)) };
        let mut pt = || loop {
            let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            if p[0] * p[0] + p[1] * p[1] <= 1.0 {
                return [p[0] * s, p[1] * s];
            }
        };
        let (p, q) = (pt(), pt());
        let m = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
        if spec.value(&m).unwrap() > (spec.value(&p).unwrap() + spec.value(&q).unwrap()) / 2.0 + 1e-12 {
            violations += 1;
        }
    }
    let mut bound_failures = 0;
    let mut grid = 0;
    let mut r: f64 = 1e-12;
    while r <= RADIAL_SEAM {
        grid += 1;
        if radial_value(r) < r / (2.0 * std::f64::consts::E * -r.ln()) {
            bound_failures += 1;
        }
        r *= 1.01;
    }
    let ok = fd_worst <= 1e-6 && violations == 0 && bound_failures == 0;
    verdict(
        10,
        "potential regularity",
        ok,
        format!("FD gradient worst {fd_worst:.2e} (≤ 1e-6) on 1e4 points; {violations} convexity violations in 1e5 pairs; lower bound fails at {bound_failures} of {grid} grid radii"),
    );
}

fn sign_changes(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
}

fn numeric_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split('\t').map(|c| c.parse().unwrap()).collect()).collect()
}

#[test]
fn criterion_11_figure_reproduction() {
    let dir = tempfile::TempDir::new().unwrap();
    let (status, elapsed) = {
        let _g = heavy();
        let clock = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_nesterov-lab")).args(["reproduce-fig2", "--out-dir"]).arg(dir.path()).output().unwrap();
        (out.status, clock.elapsed())
    };
    let read = |name: &str| std::fs::read_to_string(Path::new(dir.path()).join(name)).unwrap();
    let orbit = read("nesterov_static_orbit_eps50.tsv");
    let series = read("nesterov_static_series_eps50.tsv");
    let schema = orbit.starts_with("x1\tx2\n") && series.starts_with("time\tf_value\tarclength\n");
    let (orbit, series) = (numeric_rows(&orbit), numeric_rows(&series));
    let starts = orbit[0] == vec![0.04, 0.02];
    let crossings = sign_changes(&orbit.iter().map(|p| p[1]).collect::<Vec<_>>());
    let last = series.last().unwrap();
    let arclength = last[2];
    let in_band = (0.10..=0.25).contains(&arclength);
    let late: Vec<&Vec<f64>> = series.iter().filter(|r| r[0] >= 1e2).collect();
    let c = late.iter().filter(|r| r[0] <= 1e4).map(|r| r[0] * r[0] * r[0].ln() * r[1]).fold(f64::INFINITY, f64::min);
    let between = late.iter().all(|r| r[1] >= c / (r[0] * r[0] * r[0].ln()) * (1.0 - 1e-9) && r[1] <= 0.004 / (r[0] * r[0]));
    let fast = elapsed <= Duration::from_secs(600);
    let checks = [
        ("exit 0", status.success()),
        ("schemas", schema),
        ("starts at (0.04, 0.02)", starts),
        ("≥ 3 sign changes of x2", crossings >= 3),
        ("arclength(1e5) in [0.10, 0.25]", in_band),
        ("f between bands for t ≥ 1e2", between),
        ("runtime ≤ 10 min", fast),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        11,
        "figure reproduction",
        failed.is_empty(),
        format!(
            "t_end={}, arclength {arclength:.6}, {crossings} sign changes of x2, fitted c={c:.4e}, runtime {:.1}s; failed: {}",
            last[0],
            elapsed.as_secs_f64(),
            if failed.is_empty() { "none".to_string() } else { failed.join(", ") }
        ),
    );
}
