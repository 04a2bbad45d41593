//! Shared accepted-step loop: scheduled and arc-length sampling through the
//! continuous extension, sign-change event location, terminal events.

use crate::error::FailureKind;

use super::rk::{locate_root, Dopri5, OdeSystem, StepControl};
use super::{Event, EventKind, FlowState, SampleOrigin, Trajectory};

type Switch<'a> = Box<dyn Fn(f64, &[f64]) -> f64 + 'a>;

pub(crate) struct EventSpec<'a> {
    pub g: Switch<'a>,
    /// Kind recorded when `g` goes from negative to non-negative.
    pub rising: Option<EventKind>,
    pub falling: Option<EventKind>,
    pub terminal: bool,
    /// Crossings at or before this time are ignored.
    pub armed_after: f64,
}

impl<'a> EventSpec<'a> {
    pub fn crossing(g: impl Fn(f64, &[f64]) -> f64 + 'a, rising: EventKind, falling: EventKind) -> Self {
        EventSpec { g: Box::new(g), rising: Some(rising), falling: Some(falling), terminal: false, armed_after: f64::NEG_INFINITY }
    }
}

/// Aborts the run when it returns a failure for an accepted state.
pub(crate) type Guard<'a> = Box<dyn Fn(f64, &[f64]) -> Option<FailureKind> + 'a>;

pub(crate) struct Plan<'a> {
    /// Output times in `(t_start, t_end]`.
    pub times: Vec<f64>,
    /// `(state index of the arc length, spacing)`.
    pub arc: Option<(usize, f64)>,
    pub events: Vec<EventSpec<'a>>,
    /// Checked on every accepted state.
    pub guard: Option<Guard<'a>>,
}

pub(crate) struct Outcome {
    pub trajectory: Trajectory,
    pub t: f64,
    pub y: Vec<f64>,
    pub terminated: Option<EventKind>,
    pub failure: Option<FailureKind>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn drive<S: OdeSystem>(
    sys: &S,
    t_start: f64,
    y0: &[f64],
    t_end: f64,
    ctl: StepControl,
    plan: Plan<'_>,
    sample: &dyn Fn(f64, &[f64], SampleOrigin) -> FlowState,
    mut trajectory: Trajectory,
) -> Outcome {
    let n = y0.len();
    let mut rk = Dopri5::new(sys, t_start, y0, ctl);
    let mut g_prev: Vec<f64> = plan.events.iter().map(|e| (e.g)(t_start, y0)).collect();
    let mut next_time = plan.times.partition_point(|&t| t <= t_start);
    let mut next_arc = plan.arc.map(|(i, ds)| ((y0[i] / ds).floor() + 1.0) * ds);
    let mut buf = vec![0.0; n];
    let mut terminated = None;
    let mut failure = None;
    let mut final_t = t_start;
    let mut final_y = y0.to_vec();

    while rk.t() < t_end {
        let acc = match rk.step(t_end) {
            Ok(acc) => acc,
            Err(kind) => {
                failure = Some(kind);
                break;
            }
        };
        let (t_old, t_new) = (acc.t_old, acc.t_new);

        let mut found: Vec<(f64, EventKind, bool)> = Vec::new();
        for (i, ev) in plan.events.iter().enumerate() {
            let g_new = (ev.g)(t_new, rk.y());
            let g_old = g_prev[i];
            g_prev[i] = g_new;
            let was = g_old >= 0.0;
            let now = g_new >= 0.0;
            if was == now {
                continue;
            }
            let kind = if now { ev.rising } else { ev.falling };
            let Some(kind) = kind else { continue };
            let t_ev = locate_root(
                |t| {
                    rk.dense(t, &mut buf);
                    (ev.g)(t, &buf)
                },
                t_old,
                t_new,
                g_old,
                g_new,
            );
            if t_ev <= ev.armed_after {
                continue;
            }
            found.push((t_ev, kind, ev.terminal));
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        let stop = found.iter().find(|e| e.2).map(|e| (e.0, e.1));
        let t_cut = stop.map_or(t_new, |s| s.0);

        let mut points: Vec<(f64, SampleOrigin)> = Vec::new();
        while next_time < plan.times.len() && plan.times[next_time] <= t_cut {
            points.push((plan.times[next_time], SampleOrigin::Schedule));
            next_time += 1;
        }
        if let (Some((idx, ds)), Some(level)) = (plan.arc, next_arc.as_mut()) {
            rk.dense(t_old, &mut buf);
            let mut lo = t_old;
            let mut s_lo = buf[idx];
            rk.dense(t_cut, &mut buf);
            let s_hi = buf[idx];
            while *level <= s_hi {
                let target = *level;
                let t_s = locate_root(
                    |t| {
                        rk.dense(t, &mut buf);
                        buf[idx] - target
                    },
                    lo,
                    t_cut,
                    s_lo - target,
                    s_hi - target,
                );
                points.push((t_s, SampleOrigin::Arclength));
                lo = t_s;
                s_lo = target;
                *level += ds;
            }
        }
        if let Some((t_stop, _)) = stop {
            points.push((t_stop, SampleOrigin::Event));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (t, origin) in points {
            if trajectory.samples.last().is_some_and(|s| s.t >= t) {
                continue;
            }
            if t == t_new {
                trajectory.samples.push(sample(t, rk.y(), origin));
            } else {
                rk.dense(t, &mut buf);
                trajectory.samples.push(sample(t, &buf, origin));
            }
        }
        trajectory.events.extend(
            found.iter().filter(|e| e.0 <= t_cut).map(|&(t, kind, _)| Event { t, kind }),
        );

        if let Some((t_stop, kind)) = stop {
            rk.dense(t_stop, &mut buf);
            final_t = t_stop;
            final_y.copy_from_slice(&buf);
            terminated = Some(kind);
            break;
        }
        final_t = t_new;
        final_y.copy_from_slice(rk.y());
        if let Some(guard) = &plan.guard {
            if let Some(kind) = guard(t_new, rk.y()) {
                failure = Some(kind);
                break;
            }
        }
    }
    trajectory.steps += rk.steps();
    Outcome { trajectory, t: final_t, y: final_y, terminated, failure }
}
