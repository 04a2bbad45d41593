//! Flow integration: the critical Nesterov flow `ẍ + (3/t)ẋ + ∇f(x) = 0`
//! in Cartesian form, its polar reduction inside the radial region, an
//! orbit-averaged continuation for long horizons, and gradient flow.
//!
//! Every leg integrates its accumulators (arc length, torque, and the
//! `t·f` and `t·‖V‖²` integrals) inside the Runge–Kutta state.

mod averaged;
mod drive;
mod gradient;
mod nesterov;
mod pipeline;
mod polar;
pub mod rk;

pub use averaged::{integrate_averaged_nesterov, orbit_averages, OrbitAverages};
pub use gradient::integrate_gradient_flow;
pub use nesterov::{expansion_residual, integrate_nesterov, integrate_nesterov_from, small_time_expansion};
pub use pipeline::{estimate_kappa, run_nesterov, t_rad_empirical, KappaEstimate, LegPlan, NesterovRun};
pub use polar::{integrate_polar_leg, integrate_polar_nesterov};

use crate::error::{Error, Result};

/// Which formulation produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Leg {
    Cartesian,
    Polar,
    Averaged,
}

impl Leg {
    pub fn code(self) -> u8 {
        match self {
            Leg::Cartesian => 0,
            Leg::Polar => 1,
            Leg::Averaged => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Leg> {
        match code {
            0 => Some(Leg::Cartesian),
            1 => Some(Leg::Polar),
            2 => Some(Leg::Averaged),
            _ => None,
        }
    }
}

/// Why a sample was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleOrigin {
    /// Exact initial data at `t = 0`.
    Initial,
    /// Point of the output time grid.
    Schedule,
    /// Equal arc-length spacing (orbit rendering).
    Arclength,
    /// Terminal event or leg boundary.
    Event,
}

/// Augmented integration state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// `∫ ‖V‖ dτ`
    pub arclength: f64,
    /// `ε ∫ s³ X₂(s)(X₁(s) − a)₊ ds`
    pub torque_integral: f64,
    /// `∫ τ f(X(τ)) dτ`
    pub weighted_f: f64,
    /// `∫ τ ‖V(τ)‖² dτ`
    pub weighted_v2: f64,
    pub leg: Leg,
    pub origin: SampleOrigin,
    /// Present on orbit-averaged samples; `x`, `v` are then the pericentre of
    /// the osculating orbit at the mean angle.
    pub orbit: Option<OrbitAverages>,
}

impl FlowState {
    pub fn at_rest(x0: &[f64]) -> Self {
        FlowState {
            t: 0.0,
            x: x0.to_vec(),
            v: vec![0.0; x0.len()],
            arclength: 0.0,
            torque_integral: 0.0,
            weighted_f: 0.0,
            weighted_v2: 0.0,
            leg: Leg::Cartesian,
            origin: SampleOrigin::Initial,
            orbit: None,
        }
    }

    pub fn radius(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn speed_squared(&self) -> f64 {
        self.v.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.x.iter().chain(&self.v).all(|v| v.is_finite())
            && self.arclength.is_finite()
            && self.torque_integral.is_finite()
            && self.weighted_f.is_finite()
            && self.weighted_v2.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    RadialEntry,
    RadialExit,
    SeamCrossR,
    SeamCrossPsi,
    MinimizerReached,
    PolarHandoff,
    AveragingStart,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::RadialEntry => "RadialEntry",
            EventKind::RadialExit => "RadialExit",
            EventKind::SeamCrossR => "SeamCross_r",
            EventKind::SeamCrossPsi => "SeamCross_psi",
            EventKind::MinimizerReached => "MinimizerReached",
            EventKind::PolarHandoff => "PolarHandoff",
            EventKind::AveragingStart => "AveragingStart",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            EventKind::RadialEntry,
            EventKind::RadialExit,
            EventKind::SeamCrossR,
            EventKind::SeamCrossPsi,
            EventKind::MinimizerReached,
            EventKind::PolarHandoff,
            EventKind::AveragingStart,
        ]
        .into_iter()
        .find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

/// Time-ordered samples plus event markers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<FlowState>,
    pub events: Vec<Event>,
    pub steps: u64,
}

impl Trajectory {
    pub fn last(&self) -> Option<&FlowState> {
        self.samples.last()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Appends `other`, dropping its samples that do not advance time.
    pub fn extend(&mut self, other: Trajectory) {
        let t_last = self.samples.last().map(|s| s.t).unwrap_or(f64::NEG_INFINITY);
        self.samples.extend(other.samples.into_iter().filter(|s| s.t > t_last));
        self.events.extend(other.events);
        self.steps += other.steps;
    }

    /// Linear interpolation of the arc length at `t` (clamped to the samples).
    pub fn arclength_at(&self, t: f64) -> Option<f64> {
        interpolate(&self.samples, t, |s| s.arclength)
    }
}

pub(crate) fn interpolate(samples: &[FlowState], t: f64, field: impl Fn(&FlowState) -> f64) -> Option<f64> {
    let first = samples.first()?;
    let last = samples.last()?;
    if t < first.t || t > last.t {
        return None;
    }
    let idx = samples.partition_point(|s| s.t < t);
    if idx < samples.len() && samples[idx].t == t {
        return Some(field(&samples[idx]));
    }
    let (a, b) = (&samples[idx - 1], &samples[idx]);
    let w = (t - a.t) / (b.t - a.t);
    Some(field(a) + w * (field(b) - field(a)))
}

/// Output time grid.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleSchedule {
    /// `10^{j/n}` for integer `j`, exact at powers of ten.
    LogUniform { per_decade: u32 },
    Explicit(Vec<f64>),
}

impl SampleSchedule {
    /// Grid points in `(start, end]`, always ending with `end`.
    pub fn times(&self, start: f64, end: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            SampleSchedule::LogUniform { per_decade } => {
                let n = *per_decade as i64;
                let lo = start.max(1e-300);
                let mut j = (lo.log10() * n as f64).floor() as i64 - 1;
                loop {
                    let t = if j % n == 0 { 10f64.powi((j / n) as i32) } else { 10f64.powf(j as f64 / n as f64) };
                    if t > end {
                        break;
                    }
                    if t > start {
                        out.push(t);
                    }
                    j += 1;
                }
            }
            SampleSchedule::Explicit(times) => {
                out.extend(times.iter().copied().filter(|&t| t > start && t <= end));
                out.sort_by(f64::total_cmp);
                out.dedup();
            }
        }
        if out.last().is_none_or(|&t| t < end) {
            out.push(end);
        }
        out
    }
}

/// Integration settings shared by every leg.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    /// Start of the Nesterov integration (the `3/t` friction is never evaluated at 0).
    pub t0: f64,
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub schedule: SampleSchedule,
    /// Extra samples every `arc_spacing` of path length, if set.
    pub arc_spacing: Option<f64>,
    /// Gradient flow stops once `‖X‖` drops below this.
    pub stop_radius: f64,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            t0: 1e-6,
            t_end: 1e5,
            rel_tol: 1e-10,
            abs_tol: 1e-16,
            max_step: f64::INFINITY,
            initial_step: None,
            schedule: SampleSchedule::LogUniform { per_decade: 400 },
            arc_spacing: None,
            stop_radius: 1e-12,
            max_steps: 4_000_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_horizon(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0 < self.t_end) || !self.t_end.is_finite() {
            return Err(Error::Domain(format!("need 0 < t0 < t_end, got t0={} t_end={}", self.t0, self.t_end)));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Domain("max_step must be positive".into()));
        }
        if let SampleSchedule::LogUniform { per_decade: 0 } = self.schedule {
            return Err(Error::Domain("per_decade must be positive".into()));
        }
        if let Some(ds) = self.arc_spacing {
            if !(ds > 0.0) {
                return Err(Error::Domain("arc_spacing must be positive".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn step_control(&self) -> rk::StepControl {
        rk::StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            initial_step: self.initial_step,
            max_steps: self.max_steps,
        }
    }
}
