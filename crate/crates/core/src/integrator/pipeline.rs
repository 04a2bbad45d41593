//! Multi-leg Nesterov runs: Cartesian up to the polar handoff, polar in the
//! radial region, orbit-averaged once the period is negligible.

use crate::error::IntegrationError;
use crate::potential::{PotentialSpec, RadialProfile};

use super::averaged::integrate_averaged_nesterov;
use super::nesterov::{integrate_nesterov, integrate_nesterov_from};
use super::polar::integrate_polar_leg;
use super::{Event, EventKind, IntegratorConfig, Leg, Trajectory};

/// Where the leg switches happen. `None` disables a switch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegPlan {
    pub polar_handoff: Option<f64>,
    /// The averaged leg starts at the first pericentre after this time.
    pub average_after: Option<f64>,
}

impl Default for LegPlan {
    fn default() -> Self {
        LegPlan { polar_handoff: Some(1e2), average_after: Some(3e2) }
    }
}

impl LegPlan {
    pub fn cartesian_only() -> Self {
        LegPlan { polar_handoff: None, average_after: None }
    }
}

/// `t³J` statistics over a window of Cartesian samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaEstimate {
    pub mean: f64,
    pub std: f64,
    pub samples: usize,
    pub window: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct NesterovRun {
    pub trajectory: Trajectory,
    pub t_rad: Option<f64>,
    pub kappa: Option<KappaEstimate>,
    pub handoff_time: Option<f64>,
    pub averaging_time: Option<f64>,
    /// Why a requested switch was not taken.
    pub notes: Vec<String>,
}

/// Last radial-region entry with no later exit. `Some(0)` if the run starts
/// inside and never leaves; `None` if it ends outside or never entered.
pub fn t_rad_empirical(traj: &Trajectory, a: f64) -> Option<f64> {
    let last = traj
        .events
        .iter()
        .rfind(|e| matches!(e.kind, EventKind::RadialEntry | EventKind::RadialExit));
    match last {
        Some(Event { t, kind: EventKind::RadialEntry }) => Some(*t),
        Some(_) => None,
        None => traj.samples.first().filter(|s| s.radius() <= a).map(|_| 0.0),
    }
}

/// Mean and standard deviation of `t³J` over Cartesian samples in `[lo, hi]`.
pub fn estimate_kappa(traj: &Trajectory, lo: f64, hi: f64) -> Option<KappaEstimate> {
    let vals: Vec<f64> = traj
        .samples
        .iter()
        .filter(|s| s.leg == Leg::Cartesian && s.t >= lo && s.t <= hi && s.x.len() == 2)
        .map(|s| s.t.powi(3) * (s.x[0] * s.v[1] - s.x[1] * s.v[0]))
        .collect();
    if vals.is_empty() {
        return None;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(KappaEstimate { mean, std: var.sqrt(), samples: vals.len(), window: (lo, hi) })
}

/// Runs the Nesterov flow from rest at `x0` to `cfg.t_end` following `plan`.
///
/// The polar switch is only taken for the radial-profile potentials, with
/// the state inside the radial region at the handoff and `κ` clearly
/// nonzero; otherwise the Cartesian leg simply continues.
pub fn run_nesterov(spec: &PotentialSpec, x0: &[f64], cfg: &IntegratorConfig, plan: LegPlan) -> Result<NesterovRun, IntegrationError> {
    let radius = spec.radial_radius();
    let handoff = match (plan.polar_handoff, radius) {
        (Some(h), Some(_)) if h > cfg.t0 && h < cfg.t_end => Some(h),
        _ => None,
    };
    let mut notes = Vec::new();
    let Some(t_h) = handoff else {
        let traj = integrate_nesterov(spec, x0, cfg)?;
        let t_rad = radius.and_then(|a| t_rad_empirical(&traj, a));
        let kappa = t_rad.and_then(|tr| estimate_kappa(&traj, (cfg.t_end / 10.0).max(tr), cfg.t_end));
        return Ok(NesterovRun { trajectory: traj, t_rad, kappa, handoff_time: None, averaging_time: None, notes });
    };
    let a = radius.unwrap_or(f64::INFINITY);

    let mut traj = integrate_nesterov(spec, x0, &cfg.clone().with_horizon(t_h))?;
    let t_rad = t_rad_empirical(&traj, a);
    let kappa = t_rad.and_then(|tr| estimate_kappa(&traj, (t_h / 10.0).max(tr), t_h));
    let here = traj.last().cloned().expect("a completed leg has samples");

    let usable = match (t_rad, kappa) {
        (Some(_), Some(k)) => k.mean.abs() > 0.0 && k.std <= 1e-3 * k.mean.abs() && here.radius() <= a,
        _ => false,
    };
    if !usable {
        notes.push(format!("polar handoff at t={t_h:e} skipped: not settled in the radial region with nonzero angular momentum"));
        let rest = integrate_nesterov_from(spec, &here, cfg).map_err(|mut e| {
            let mut partial = traj.clone();
            partial.extend(*e.partial);
            e.partial = Box::new(partial);
            e
        })?;
        traj.extend(rest);
        return Ok(NesterovRun { trajectory: traj, t_rad, kappa, handoff_time: None, averaging_time: None, notes });
    }
    let k = kappa.expect("checked above").mean;
    traj.events.push(Event { t: t_h, kind: EventKind::PolarHandoff });

    let after = plan.average_after.filter(|&t| t >= t_h && t < cfg.t_end);
    let stitch = |traj: &Trajectory, mut e: IntegrationError| {
        let mut partial = traj.clone();
        partial.extend(*e.partial);
        e.partial = Box::new(partial);
        e
    };
    let (polar, stop) = integrate_polar_leg(&RadialProfile, k, &here, cfg, after).map_err(|e| stitch(&traj, e))?;
    traj.extend(polar);
    let mut averaging_time = None;
    if let Some(stop) = stop {
        // the polar leg has already recorded the AveragingStart event
        match integrate_averaged_nesterov(k, &stop, cfg) {
            Ok(avg) => {
                averaging_time = Some(stop.t);
                traj.extend(avg);
            }
            Err(e) if e.partial.samples.is_empty() => {
                // averaging not admissible yet: stay on the resolved polar leg
                traj.events.retain(|e| !(e.kind == EventKind::AveragingStart && e.t == stop.t));
                notes.push(format!("orbit averaging refused at t={:e}: {}", stop.t, e.kind));
                let (rest, _) = integrate_polar_leg(&RadialProfile, k, &stop, cfg, None).map_err(|e| stitch(&traj, e))?;
                traj.extend(rest);
            }
            Err(e) => return Err(stitch(&traj, e)),
        }
    }
    Ok(NesterovRun { trajectory: traj, t_rad, kappa, handoff_time: Some(t_h), averaging_time, notes })
}
