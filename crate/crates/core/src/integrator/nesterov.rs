//! Cartesian integration of `Ẍ + (3/t)Ẋ + ∇f(X) = 0`.

use crate::error::{Error, FailureKind, IntegrationError, Result};
use crate::potential::{PotentialSpec, RADIAL_SEAM};

use super::drive::{drive, EventSpec, Plan};
use super::rk::OdeSystem;
use super::{EventKind, FlowState, IntegratorConfig, Leg, SampleOrigin, Trajectory};

/// State layout: `[X (d), V (d), arclength, torque, ∫τf, ∫τ‖V‖²]`.
pub(crate) struct CartesianSystem<'p> {
    spec: &'p PotentialSpec,
    d: usize,
}

impl<'p> CartesianSystem<'p> {
    pub(crate) fn new(spec: &'p PotentialSpec) -> Self {
        CartesianSystem { spec, d: spec.dim() }
    }

    pub(crate) fn pack(&self, s: &FlowState) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.d + 4);
        y.extend_from_slice(&s.x);
        y.extend_from_slice(&s.v);
        y.extend_from_slice(&[s.arclength, s.torque_integral, s.weighted_f, s.weighted_v2]);
        y
    }

    pub(crate) fn unpack(&self, t: f64, y: &[f64], origin: SampleOrigin) -> FlowState {
        let d = self.d;
        FlowState {
            t,
            x: y[..d].to_vec(),
            v: y[d..2 * d].to_vec(),
            arclength: y[2 * d],
            torque_integral: y[2 * d + 1],
            weighted_f: y[2 * d + 2],
            weighted_v2: y[2 * d + 3],
            leg: Leg::Cartesian,
            origin,
            orbit: None,
        }
    }
}

impl OdeSystem for CartesianSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.d + 4
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.d;
        let (x, rest) = y.split_at(d);
        let v = &rest[..d];
        let f = self.spec.value_gradient_into(x, &mut dy[d..2 * d]);
        let friction = 3.0 / t;
        let mut v2 = 0.0;
        for i in 0..d {
            dy[i] = v[i];
            dy[d + i] = -friction * v[i] - dy[d + i];
            v2 += v[i] * v[i];
        }
        dy[2 * d] = v2.sqrt();
        dy[2 * d + 1] = match *self.spec {
            PotentialSpec::Pathological { a, eps } => eps * t * t * t * x[1] * (x[0] - a).max(0.0),
            _ => 0.0,
        };
        dy[2 * d + 2] = t * f;
        dy[2 * d + 3] = t * v2;
    }
}

/// Taylor start at `t0`: `X = X0 − t0²∇f(X0)/8`, `V = −t0∇f(X0)/4`, with the
/// accumulators integrated over the same quadratic model.
pub fn small_time_expansion(spec: &PotentialSpec, x0: &[f64], t0: f64) -> Result<FlowState> {
    spec.check_dim(x0)?;
    if !(t0 > 0.0) || !t0.is_finite() {
        return Err(Error::Domain(format!("t0 must be positive, got {t0}")));
    }
    let g = spec.gradient(x0)?;
    let g2: f64 = g.iter().map(|v| v * v).sum();
    let x: Vec<f64> = x0.iter().zip(&g).map(|(xi, gi)| xi - t0 * t0 * gi / 8.0).collect();
    let v: Vec<f64> = g.iter().map(|gi| -t0 * gi / 4.0).collect();
    let torque = match *spec {
        PotentialSpec::Pathological { a, eps } => eps * x0[1] * (x0[0] - a).max(0.0) * t0.powi(4) / 4.0,
        _ => 0.0,
    };
    Ok(FlowState {
        t: t0,
        x,
        v,
        arclength: t0 * t0 * g2.sqrt() / 8.0,
        torque_integral: torque,
        weighted_f: 0.5 * t0 * t0 * spec.value(x0)?,
        weighted_v2: g2 * t0.powi(4) / 64.0,
        leg: Leg::Cartesian,
        origin: SampleOrigin::Event,
        orbit: None,
    })
}

/// `‖Ẍ + (3/t)Ẋ + ∇f(X)‖` of the Taylor start at `t0`; `O(t0²)` for a smooth gradient.
pub fn expansion_residual(spec: &PotentialSpec, x0: &[f64], t0: f64) -> Result<f64> {
    let s = small_time_expansion(spec, x0, t0)?;
    let g0 = spec.gradient(x0)?;
    let g = spec.gradient(&s.x)?;
    // the model has Ẍ + (3/t)Ẋ = −∇f(X0)
    Ok(g.iter().zip(&g0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

pub(crate) fn cartesian_events(spec: &PotentialSpec) -> Vec<EventSpec<'static>> {
    let norm = |y: &[f64]| y[0].hypot(y[1]);
    let mut events = Vec::new();
    match *spec {
        PotentialSpec::Pathological { a, .. } => {
            events.push(EventSpec::crossing(move |_, y| norm(y) - a, EventKind::RadialExit, EventKind::RadialEntry));
            events.push(EventSpec::crossing(move |_, y| norm(y) - RADIAL_SEAM, EventKind::SeamCrossR, EventKind::SeamCrossR));
            events.push(EventSpec::crossing(move |_, y| y[0] - a, EventKind::SeamCrossPsi, EventKind::SeamCrossPsi));
        }
        PotentialSpec::PureRadial => {
            events.push(EventSpec::crossing(move |_, y| norm(y) - RADIAL_SEAM, EventKind::SeamCrossR, EventKind::SeamCrossR));
        }
        PotentialSpec::Quadratic(_) => {}
    }
    events
}

/// Integrates from rest at `X0` to `cfg.t_end`. The first sample is the exact
/// initial state at `t = 0`; integration itself starts at `cfg.t0` from the
/// small-time expansion.
pub fn integrate_nesterov(spec: &PotentialSpec, x0: &[f64], cfg: &IntegratorConfig) -> std::result::Result<Trajectory, IntegrationError> {
    cfg.validate().map_err(|e| IntegrationError::invalid(e.to_string()))?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(IntegrationError::invalid("X0 must be finite"));
    }
    let start = small_time_expansion(spec, x0, cfg.t0).map_err(|e| IntegrationError::invalid(e.to_string()))?;
    let mut traj = Trajectory { samples: vec![FlowState::at_rest(x0)], ..Trajectory::default() };
    let rest = integrate_nesterov_from(spec, &start, cfg).map_err(|mut e| {
        let mut partial = traj.clone();
        partial.extend(*e.partial);
        e.partial = Box::new(partial);
        e
    })?;
    traj.extend(rest);
    Ok(traj)
}

/// Continues a Cartesian leg from an arbitrary state up to `cfg.t_end`; the
/// first sample is `start` itself.
pub fn integrate_nesterov_from(
    spec: &PotentialSpec,
    start: &FlowState,
    cfg: &IntegratorConfig,
) -> std::result::Result<Trajectory, IntegrationError> {
    cfg.validate().map_err(|e| IntegrationError::invalid(e.to_string()))?;
    if start.x.len() != spec.dim() || start.v.len() != spec.dim() {
        return Err(IntegrationError::invalid(format!("state dimension does not match the {}-D potential", spec.dim())));
    }
    if !(start.t > 0.0) || start.t >= cfg.t_end {
        return Err(IntegrationError::invalid(format!("start time {} must lie in (0, t_end)", start.t)));
    }
    let sys = CartesianSystem::new(spec);
    let y0 = sys.pack(start);
    let d = spec.dim();
    let plan = Plan {
        times: cfg.schedule.times(start.t, cfg.t_end),
        arc: cfg.arc_spacing.map(|ds| (2 * d, ds)),
        events: if d == 2 { cartesian_events(spec) } else { Vec::new() },
        guard: None,
    };
    let mut first = start.clone();
    first.leg = Leg::Cartesian;
    let seed = Trajectory { samples: vec![first], ..Trajectory::default() };
    let out = drive(&sys, start.t, &y0, cfg.t_end, cfg.step_control(), plan, &|t, y, o| sys.unpack(t, y, o), seed);
    match out.failure {
        Some(kind) => Err(IntegrationError::new(kind, out.trajectory)),
        None if out.t < cfg.t_end => Err(IntegrationError::new(FailureKind::HorizonNotReached { t: out.t }, out.trajectory)),
        None => Ok(out.trajectory),
    }
}
