//! Polar reduction inside the radial region. With `t³J = κ` the flow becomes
//! `r̈ + (3/t)ṙ + F'(r) = κ²/(t⁶r³)`, `θ̇ = κ/(t³r²)`.
//!
//! The radius is carried as `u = ln r` with `w = u̇ = ṙ/r`, so the step
//! control sees relative radial errors even as `r` shrinks like `t⁻²`.

use crate::error::{FailureKind, IntegrationError};
use crate::potential::RadialProfile;

use super::drive::{drive, EventSpec, Plan};
use super::rk::OdeSystem;
use super::{EventKind, FlowState, IntegratorConfig, Leg, SampleOrigin, Trajectory};

const COLLAPSE_RADIUS: f64 = 1e-14;

/// State layout: `[u, w, θ, arclength, ∫τF, ∫τ‖V‖²]`.
pub(crate) struct PolarSystem {
    profile: RadialProfile,
    kappa: f64,
}

impl OdeSystem for PolarSystem {
    fn dim(&self) -> usize {
        6
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let (u, w) = (y[0], y[1]);
        let r = u.exp();
        let t3 = t * t * t;
        let omega = self.kappa / (t3 * r * r);
        let speed2_over_r2 = w * w + omega * omega;
        dy[0] = w;
        dy[1] = -w * w - 3.0 * w / t - self.profile.slope(r) / r + omega * omega;
        dy[2] = omega;
        dy[3] = r * speed2_over_r2.sqrt();
        dy[4] = t * self.profile.value(r);
        dy[5] = t * r * r * speed2_over_r2;
    }
}

pub(crate) fn to_polar(s: &FlowState) -> [f64; 6] {
    let r = s.radius();
    let w = (s.x[0] * s.v[0] + s.x[1] * s.v[1]) / (r * r);
    let theta = s.x[1].atan2(s.x[0]);
    [r.ln(), w, theta, s.arclength, s.weighted_f, s.weighted_v2]
}

pub(crate) fn from_polar(kappa: f64, torque: f64, t: f64, y: &[f64], origin: SampleOrigin) -> FlowState {
    let r = y[0].exp();
    let (sin, cos) = y[2].sin_cos();
    let radial = r * y[1];
    let tangential = kappa / (t * t * t * r);
    FlowState {
        t,
        x: vec![r * cos, r * sin],
        v: vec![radial * cos - tangential * sin, radial * sin + tangential * cos],
        arclength: y[3],
        torque_integral: torque,
        weighted_f: y[4],
        weighted_v2: y[5],
        leg: Leg::Polar,
        origin,
        orbit: None,
    }
}

/// Polar leg from `handoff` to `cfg.t_end`; the first sample is the handoff
/// state re-expressed with tangential speed `κ/(t³r)`.
pub fn integrate_polar_nesterov(
    profile: &RadialProfile,
    kappa: f64,
    handoff: &FlowState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrationError> {
    integrate_polar_leg(profile, kappa, handoff, cfg, None).map(|(traj, _)| traj)
}

/// Like [`integrate_polar_nesterov`], optionally stopping at the first
/// pericentre (`ṙ` turning positive) after `stop_after`. Returns the
/// stopping state when that happens.
pub fn integrate_polar_leg(
    profile: &RadialProfile,
    kappa: f64,
    handoff: &FlowState,
    cfg: &IntegratorConfig,
    stop_after: Option<f64>,
) -> Result<(Trajectory, Option<FlowState>), IntegrationError> {
    cfg.validate().map_err(|e| IntegrationError::invalid(e.to_string()))?;
    if handoff.x.len() != 2 || handoff.v.len() != 2 {
        return Err(IntegrationError::invalid("polar reduction needs a 2-D state"));
    }
    if !kappa.is_finite() {
        return Err(IntegrationError::invalid("kappa must be finite"));
    }
    let r0 = handoff.radius();
    if !(r0 >= COLLAPSE_RADIUS) {
        return Err(IntegrationError::invalid(format!("handoff radius {r0:e} is below the collapse threshold")));
    }
    if !(handoff.t > 0.0) || handoff.t >= cfg.t_end {
        return Err(IntegrationError::invalid(format!("handoff time {} must lie in (0, t_end)", handoff.t)));
    }
    let sys = PolarSystem { profile: *profile, kappa };
    let y0 = to_polar(handoff);
    let torque = handoff.torque_integral;
    let unpack = |t: f64, y: &[f64], origin: SampleOrigin| from_polar(kappa, torque, t, y, origin);
    let events = match stop_after {
        Some(after) => vec![EventSpec {
            g: Box::new(|_, y: &[f64]| y[1]),
            rising: Some(EventKind::AveragingStart),
            falling: None,
            terminal: true,
            armed_after: after,
        }],
        None => Vec::new(),
    };
    let plan = Plan {
        times: cfg.schedule.times(handoff.t, cfg.t_end),
        arc: cfg.arc_spacing.map(|ds| (3, ds)),
        events,
        guard: Some(Box::new(|t, y: &[f64]| {
            let r = y[0].exp();
            (r < COLLAPSE_RADIUS).then_some(FailureKind::RadiusCollapse { t, r })
        })),
    };
    let seed = Trajectory { samples: vec![unpack(handoff.t, &y0, handoff.origin)], ..Trajectory::default() };
    let out = drive(&sys, handoff.t, &y0, cfg.t_end, cfg.step_control(), plan, &unpack, seed);
    if let Some(kind) = out.failure {
        return Err(IntegrationError::new(kind, out.trajectory));
    }
    let stop = out.terminated.map(|_| unpack(out.t, &out.y, SampleOrigin::Event));
    if stop.is_none() && out.t < cfg.t_end {
        return Err(IntegrationError::new(FailureKind::HorizonNotReached { t: out.t }, out.trajectory));
    }
    Ok((out.trajectory, stop))
}
