//! Radial reductions: the unperturbed flow along the ray through `(2, 1)`
//! and the finite arrival time of gradient flow.

use crate::error::{Error, FailureKind, IntegrationError, Result};
use crate::integrator::rk::{locate_root, Dopri5, OdeSystem, StepControl};
use crate::integrator::{FlowState, IntegratorConfig, Leg, SampleOrigin, Trajectory};
use crate::potential::{radial_slope, RADIAL_SEAM};

const SQRT5: f64 = 2.236_067_977_499_79;

/// `ρ̈ + (3/t)ρ̇ + F'(√5|ρ|) sign(ρ)/√5 = 0`, plus the torque functional
/// `∫ s³ ρ(2ρ − a)₊ ds` as a third component.
struct RayFlow {
    a: f64,
}

impl OdeSystem for RayFlow {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let rho = y[0];
        dy[0] = y[1];
        dy[1] = -3.0 * y[1] / t - radial_slope(SQRT5 * rho.abs()) * rho.signum() / SQRT5;
        dy[2] = t * t * t * rho * (2.0 * rho - self.a).max(0.0);
    }
}

/// Integrand of the torque functional at one instant.
pub fn eps0_torque_functional(s: f64, rho: f64, a: f64) -> f64 {
    s * s * s * rho * (2.0 * rho - a).max(0.0)
}

/// Scalar trajectory of the `ε = 0` flow from `X(0) = (2a, a)`, i.e. `ρ(0) = a`.
///
/// Samples carry `x = [ρ]`, `v = [ρ̇]` and the torque functional in
/// `torque_integral`. The first sample is the exact start at `t = 0`.
pub fn radial_eps0_reduction(a: f64, cfg: &IntegratorConfig) -> std::result::Result<Trajectory, IntegrationError> {
    cfg.validate().map_err(|e| IntegrationError::invalid(e.to_string()))?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(IntegrationError::invalid(format!("a must be positive, got {a}")));
    }
    let sys = RayFlow { a };
    let g = radial_slope(SQRT5 * a) / SQRT5;
    let t0 = cfg.t0;
    let y0 = [a - t0 * t0 * g / 8.0, -t0 * g / 4.0, a * (2.0 * a - a).max(0.0) * t0.powi(4) / 4.0];
    let sample = |t: f64, y: &[f64], origin: SampleOrigin| FlowState {
        t,
        x: vec![y[0]],
        v: vec![y[1]],
        arclength: 0.0,
        torque_integral: y[2],
        weighted_f: 0.0,
        weighted_v2: 0.0,
        leg: Leg::Cartesian,
        origin,
        orbit: None,
    };
    let mut traj = Trajectory {
        samples: vec![sample(0.0, &[a, 0.0, 0.0], SampleOrigin::Initial), sample(t0, &y0, SampleOrigin::Event)],
        ..Trajectory::default()
    };
    let times = cfg.schedule.times(t0, cfg.t_end);
    let mut rk = Dopri5::new(&sys, t0, &y0, cfg.step_control());
    let mut next = 0;
    let mut buf = [0.0; 3];
    while rk.t() < cfg.t_end {
        let acc = rk.step(cfg.t_end).map_err(|k| IntegrationError::new(k, traj.clone()))?;
        while next < times.len() && times[next] <= acc.t_new {
            rk.dense(times[next], &mut buf);
            traj.samples.push(sample(times[next], &buf, SampleOrigin::Schedule));
            next += 1;
        }
    }
    traj.steps = rk.steps();
    Ok(traj)
}

/// Arrival time at the origin of `ṙ = −F'(r)` from `r0 ∈ (0, e⁻²]`:
/// `dt = (−log r) dr` integrates to `T = r0 (1 − log r0)`.
pub fn gradient_flow_hit_time(r0: f64) -> Result<f64> {
    if !(r0 > 0.0 && r0 <= RADIAL_SEAM * (1.0 + 1e-15)) {
        return Err(Error::Domain(format!("r0 must lie in (0, e^-2], got {r0}")));
    }
    Ok(r0 * (1.0 - r0.ln()))
}

struct RadialDescent;

impl OdeSystem for RadialDescent {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = -radial_slope(y[0]);
    }
}

/// Time for `ṙ = −F'(r)` to fall from `r0` to `stop_radius`, by adaptive
/// integration with the crossing located on the continuous extension.
pub fn gradient_flow_hit_time_numeric(r0: f64, stop_radius: f64, rel_tol: f64) -> std::result::Result<f64, IntegrationError> {
    if !(r0 > stop_radius && stop_radius > 0.0 && rel_tol > 0.0) {
        return Err(IntegrationError::invalid("need r0 > stop_radius > 0 and rel_tol > 0"));
    }
    let ctl = StepControl { rel_tol, abs_tol: 1e-3 * stop_radius, max_step: f64::INFINITY, initial_step: None, max_steps: 10_000_000 };
    let mut rk = Dopri5::new(&RadialDescent, 0.0, &[r0], ctl);
    // r(t) reaches 0 before t = r0(1 − log r0) ≤ 1 for r0 ≤ e⁻²; allow margin
    let horizon = 10.0 * (r0 * (1.0 - r0.ln())).max(1.0);
    let mut prev = r0;
    let mut buf = [0.0];
    while rk.t() < horizon {
        let acc = rk.step(horizon).map_err(|k| IntegrationError::new(k, Trajectory::default()))?;
        let now = rk.y()[0];
        if now < stop_radius {
            return Ok(locate_root(
                |t| {
                    rk.dense(t, &mut buf);
                    buf[0] - stop_radius
                },
                acc.t_old,
                acc.t_new,
                prev - stop_radius,
                now - stop_radius,
            ));
        }
        prev = now;
    }
    Err(IntegrationError::new(FailureKind::HorizonNotReached { t: rk.t() }, Trajectory::default()))
}
