//! Orbit-averaged continuation inside the radial region.
//!
//! Once the orbital period is tiny compared with `t`, the flow is a slowly
//! damped central-force orbit. Its exact slow laws are
//!
//! ```text
//! E = ½‖V‖² + F(r),   dE/dt = −(3/t)‖V‖²,   L = t³J / t³ = κ/t³
//! ```
//!
//! and the averaged system replaces `‖V‖²` (and the accumulator integrands)
//! by their means over the frozen orbit with energy `E` and momentum `L`.
//! The neglected terms are `O(period/t)`.

use std::f64::consts::PI;

use crate::error::{FailureKind, IntegrationError};
use crate::potential::RadialProfile;

use super::drive::{drive, Plan};
use super::rk::OdeSystem;
use super::{FlowState, IntegratorConfig, Leg, SampleOrigin, Trajectory};

/// Largest `period/t` at which averaging is accepted.
pub const MAX_PERIOD_RATIO: f64 = 1e-3;

const CIRCULAR: f64 = 1e-5;
const QUAD_START: usize = 48;
const QUAD_MAX: usize = 1 << 14;
const QUAD_TOL: f64 = 1e-12;

/// Time averages over one radial period of the orbit with energy `energy`
/// and angular momentum `angular_momentum` in the potential `F(r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitAverages {
    pub energy: f64,
    pub angular_momentum: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub period: f64,
    pub mean_f: f64,
    pub mean_v2: f64,
    pub mean_speed: f64,
    pub mean_r2: f64,
    pub mean_inv_r2: f64,
    pub f_min: f64,
    pub f_max: f64,
}

fn effective(l: f64, r: f64) -> f64 {
    RadialProfile.value(r) + 0.5 * l * l / (r * r)
}

/// Bisection in `ln r` on a monotone bracket, to machine precision.
fn bisect_log(mut lo: f64, mut hi: f64, mut positive_at_hi: impl FnMut(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if positive_at_hi(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Radius of the circular orbit, `r³F'(r) = L²`.
fn circular_radius(l: f64) -> f64 {
    let target = l * l;
    let mut hi = 1e-3f64;
    while hi * hi * hi * RadialProfile.slope(hi) < target {
        hi *= 10.0;
    }
    let mut lo = hi * 0.1;
    while lo > 1e-300 && lo * lo * lo * RadialProfile.slope(lo) > target {
        lo *= 0.1;
    }
    bisect_log(lo, hi, |r| r * r * r * RadialProfile.slope(r) >= target)
}

/// Orbit averages for `E > U_eff(r_c)`, `L > 0`. `None` if the inputs do not
/// describe a bound non-radial orbit.
pub fn orbit_averages(energy: f64, angular_momentum: f64) -> Option<OrbitAverages> {
    let l = angular_momentum;
    if !(l > 0.0) || !energy.is_finite() || !l.is_finite() {
        return None;
    }
    let rc = circular_radius(l);
    let e_min = effective(l, rc);
    if energy < e_min * (1.0 - 1e-13) {
        return None;
    }
    let phi = |r: f64| 2.0 * (energy - effective(l, r));
    let (r_min, r_max) = if energy <= e_min {
        (rc, rc)
    } else {
        let mut lo = rc * 0.5;
        while phi(lo) > 0.0 {
            lo *= 0.5;
        }
        let mut hi = rc * 2.0;
        while phi(hi) > 0.0 {
            hi *= 2.0;
        }
        (bisect_log(lo, rc, |r| phi(r) > 0.0), bisect_log(rc, hi, |r| phi(r) <= 0.0))
    };
    let c = 0.5 * (r_min + r_max);
    let h = 0.5 * (r_max - r_min);

    if h < CIRCULAR * rc {
        let u2 = RadialProfile.curvature(rc) + 3.0 * l * l / rc.powi(4);
        let f = RadialProfile.value(rc);
        let v2 = l * l / (rc * rc);
        return Some(OrbitAverages {
            energy,
            angular_momentum: l,
            r_min,
            r_max,
            period: 2.0 * PI / u2.sqrt(),
            mean_f: f,
            mean_v2: v2,
            mean_speed: v2.sqrt(),
            mean_r2: rc * rc,
            mean_inv_r2: 1.0 / (rc * rc),
            f_min: RadialProfile.value(r_min),
            f_max: RadialProfile.value(r_max),
        });
    }

    // r = c − h cos φ maps the turning points to φ = 0, π; the weight
    // 1/√G with G = Φ/(h sin φ)² is smooth and periodic, so the midpoint
    // rule converges geometrically.
    let sums = |n: usize| {
        let mut s = [0.0f64; 6];
        for k in 0..n {
            let ph = PI * (k as f64 + 0.5) / n as f64;
            let (sin, cos) = ph.sin_cos();
            let r = c - h * cos;
            let f = RadialProfile.value(r);
            let kin = (2.0 * (energy - f)).max(0.0);
            let g = phi(r).max(0.0) / (h * h * sin * sin);
            let wgt = 1.0 / g.sqrt();
            s[0] += wgt;
            s[1] += wgt * f;
            s[2] += wgt * kin;
            s[3] += wgt * kin.sqrt();
            s[4] += wgt * r * r;
            s[5] += wgt / (r * r);
        }
        let dphi = PI / n as f64;
        [2.0 * s[0] * dphi, s[1] / s[0], s[2] / s[0], s[3] / s[0], s[4] / s[0], s[5] / s[0]]
    };
    let mut n = QUAD_START;
    let mut prev = sums(n);
    while n < QUAD_MAX {
        n *= 2;
        let next = sums(n);
        let converged = prev.iter().zip(&next).all(|(a, b)| (a - b).abs() <= QUAD_TOL * b.abs());
        prev = next;
        if converged {
            break;
        }
    }
    if prev.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(OrbitAverages {
        energy,
        angular_momentum: l,
        r_min,
        r_max,
        period: prev[0],
        mean_f: prev[1],
        mean_v2: prev[2],
        mean_speed: prev[3],
        mean_r2: prev[4],
        mean_inv_r2: prev[5],
        f_min: RadialProfile.value(r_min),
        f_max: RadialProfile.value(r_max),
    })
}

/// State layout: `[ln E, mean angle, arclength, ∫τF, ∫τ‖V‖²]`.
struct AveragedSystem {
    kappa: f64,
}

impl OdeSystem for AveragedSystem {
    fn dim(&self) -> usize {
        5
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let energy = y[0].exp();
        let l = self.kappa / (t * t * t);
        match orbit_averages(energy, l) {
            Some(o) => {
                dy[0] = -3.0 * o.mean_v2 / (t * energy);
                dy[1] = l * o.mean_inv_r2;
                dy[2] = o.mean_speed;
                dy[3] = t * o.mean_f;
                dy[4] = t * o.mean_v2;
            }
            None => dy.fill(f64::NAN),
        }
    }
}

/// Representative sample: the pericentre of the current orbit at the mean angle.
fn averaged_sample(kappa: f64, torque: f64, t: f64, y: &[f64], origin: SampleOrigin) -> FlowState {
    let energy = y[0].exp();
    let l = kappa / (t * t * t);
    let orbit = orbit_averages(energy, l);
    let r = orbit.map_or(f64::NAN, |o| o.r_min);
    let (sin, cos) = y[1].sin_cos();
    let vt = l / r;
    FlowState {
        t,
        x: vec![r * cos, r * sin],
        v: vec![-vt * sin, vt * cos],
        arclength: y[2],
        torque_integral: torque,
        weighted_f: y[3],
        weighted_v2: y[4],
        leg: Leg::Averaged,
        origin,
        orbit,
    }
}

/// Continues from `start` (ideally a pericentre, where the averaged and the
/// pointwise states coincide best) with the orbit-averaged system. Fails
/// with `AveragingBreakdown` if the period is not small against `t`.
pub fn integrate_averaged_nesterov(kappa: f64, start: &FlowState, cfg: &IntegratorConfig) -> Result<Trajectory, IntegrationError> {
    cfg.validate().map_err(|e| IntegrationError::invalid(e.to_string()))?;
    if start.x.len() != 2 {
        return Err(IntegrationError::invalid("orbit averaging needs a 2-D state"));
    }
    if !(kappa > 0.0) {
        return Err(IntegrationError::invalid("orbit averaging needs positive angular momentum"));
    }
    if !(start.t > 0.0) || start.t >= cfg.t_end {
        return Err(IntegrationError::invalid(format!("start time {} must lie in (0, t_end)", start.t)));
    }
    let t = start.t;
    let energy = 0.5 * start.speed_squared() + RadialProfile.value(start.radius());
    let check = |t: f64, energy: f64| match orbit_averages(energy, kappa / (t * t * t)) {
        Some(o) if o.period / t <= MAX_PERIOD_RATIO => None,
        Some(o) => Some(FailureKind::AveragingBreakdown { t, ratio: o.period / t }),
        None => Some(FailureKind::NonFinite { t }),
    };
    if let Some(kind) = check(t, energy) {
        return Err(IntegrationError::new(kind, Trajectory::default()));
    }
    let y0 = [energy.ln(), start.x[1].atan2(start.x[0]), start.arclength, start.weighted_f, start.weighted_v2];
    let torque = start.torque_integral;
    let sys = AveragedSystem { kappa };
    let unpack = |t: f64, y: &[f64], origin: SampleOrigin| averaged_sample(kappa, torque, t, y, origin);
    let plan = Plan {
        times: cfg.schedule.times(t, cfg.t_end),
        arc: None,
        events: Vec::new(),
        guard: Some(Box::new(move |t, y: &[f64]| check(t, y[0].exp()))),
    };
    let mut first = start.clone();
    first.origin = SampleOrigin::Event;
    let seed = Trajectory { samples: vec![first], ..Trajectory::default() };
    let out = drive(&sys, t, &y0, cfg.t_end, cfg.step_control(), plan, &unpack, seed);
    match out.failure {
        Some(kind) => Err(IntegrationError::new(kind, out.trajectory)),
        None if out.t < cfg.t_end => Err(IntegrationError::new(FailureKind::HorizonNotReached { t: out.t }, out.trajectory)),
        None => Ok(out.trajectory),
    }
}
