//! Gradient flow `Ẋ = −∇f(X)`.

use crate::error::{FailureKind, IntegrationError};
use crate::potential::PotentialSpec;

use super::drive::{drive, EventSpec, Plan};
use super::nesterov::cartesian_events;
use super::rk::OdeSystem;
use super::{Event, EventKind, FlowState, IntegratorConfig, Leg, SampleOrigin, Trajectory};

/// State layout: `[X (d), arclength]`.
struct GradientSystem<'p> {
    spec: &'p PotentialSpec,
    d: usize,
}

impl OdeSystem for GradientSystem<'_> {
    fn dim(&self) -> usize {
        self.d + 1
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.d;
        self.spec.gradient_into(&y[..d], &mut dy[..d]);
        let mut g2 = 0.0;
        for v in dy[..d].iter_mut() {
            g2 += *v * *v;
            *v = -*v;
        }
        dy[d] = g2.sqrt();
    }
}

/// Integrates the gradient flow from `X0` at `t = 0`. Stops early with a
/// `MinimizerReached` marker once `‖X‖ < cfg.stop_radius`. Samples store
/// `V = −∇f(X)`; the torque and weighted accumulators stay zero.
pub fn integrate_gradient_flow(spec: &PotentialSpec, x0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory, IntegrationError> {
    cfg.validate().map_err(|e| IntegrationError::invalid(e.to_string()))?;
    spec.check_dim(x0).map_err(|e| IntegrationError::invalid(e.to_string()))?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(IntegrationError::invalid("X0 must be finite"));
    }
    let d = spec.dim();
    let sys = GradientSystem { spec, d };
    let unpack = |t: f64, y: &[f64], origin: SampleOrigin| {
        let mut v = vec![0.0; d];
        spec.gradient_into(&y[..d], &mut v);
        v.iter_mut().for_each(|c| *c = -*c);
        FlowState {
            t,
            x: y[..d].to_vec(),
            v,
            arclength: y[d],
            torque_integral: 0.0,
            weighted_f: 0.0,
            weighted_v2: 0.0,
            leg: Leg::Cartesian,
            origin,
            orbit: None,
        }
    };
    let mut y0 = x0.to_vec();
    y0.push(0.0);
    let seed = Trajectory { samples: vec![unpack(0.0, &y0, SampleOrigin::Initial)], ..Trajectory::default() };
    let norm = |y: &[f64]| y[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm(&y0) < cfg.stop_radius {
        let mut traj = seed;
        traj.events.push(Event { t: 0.0, kind: EventKind::MinimizerReached });
        return Ok(traj);
    }

    let mut events = if d == 2 { cartesian_events(spec) } else { Vec::new() };
    let stop_radius = cfg.stop_radius;
    events.push(EventSpec {
        g: Box::new(move |_, y| norm(y) - stop_radius),
        rising: None,
        falling: Some(EventKind::MinimizerReached),
        terminal: true,
        armed_after: f64::NEG_INFINITY,
    });
    let mut times = vec![];
    times.extend(cfg.schedule.times(cfg.t0, cfg.t_end));
    if cfg.t0 < cfg.t_end {
        times.insert(0, cfg.t0);
    }
    let plan = Plan { times, arc: cfg.arc_spacing.map(|ds| (d, ds)), events, guard: None };
    let out = drive(&sys, 0.0, &y0, cfg.t_end, cfg.step_control(), plan, &unpack, seed);
    match out.failure {
        Some(kind) => Err(IntegrationError::new(kind, out.trajectory)),
        None if out.terminated.is_none() && out.t < cfg.t_end => {
            Err(IntegrationError::new(FailureKind::HorizonNotReached { t: out.t }, out.trajectory))
        }
        None => Ok(out.trajectory),
    }
}
