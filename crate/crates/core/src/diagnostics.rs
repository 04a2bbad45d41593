//! Conservation laws, monotone quantities and rate envelopes evaluated on a
//! sampled trajectory. Every "for all t" statement is checked on the sample
//! grid only.
//!
//! Orbit-averaged samples contribute their orbit envelopes: upper bounds use
//! the apocentre (`f_max`, `r_max`), lower bounds the pericentre (`f_min`).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::integrator::{estimate_kappa, t_rad_empirical, EventKind, FlowState, KappaEstimate, Leg, Trajectory};
use crate::potential::PotentialSpec;

/// `J = X₁V₂ − X₂V₁`.
pub fn angular_momentum(state: &FlowState) -> Result<f64> {
    if state.x.len() != 2 || state.v.len() != 2 {
        return Err(Error::Dimension { expected: 2, got: state.x.len() });
    }
    Ok(state.x[0] * state.v[1] - state.x[1] * state.v[0])
}

fn scaled_momentum(s: &FlowState) -> f64 {
    s.t.powi(3) * (s.x[0] * s.v[1] - s.x[1] * s.v[0])
}

/// `max |t³J − ε∫s³X₂(X₁−a)₊ds| / max(1, |t³J|)` over samples with
/// `t ≤ t_max`, and `κ` read off the torque accumulator at the last sample
/// (the torque is inactive inside the radial region).
pub fn torque_balance(traj: &Trajectory, spec: &PotentialSpec, t_max: f64) -> Result<(f64, f64)> {
    let PotentialSpec::Pathological { .. } = spec else {
        return Err(Error::Domain("torque balance applies to the pathological potential".into()));
    };
    let last = traj.samples.last().ok_or_else(|| Error::MissingAccumulators("empty trajectory".into()))?;
    let mut worst = 0.0f64;
    for s in traj.samples.iter().filter(|s| s.t <= t_max) {
        let m = scaled_momentum(s);
        worst = worst.max((m - s.torque_integral).abs() / m.abs().max(1.0));
    }
    Ok((worst, last.torque_integral))
}

/// `(max − min) / |mean|` of `t³J` over samples in `[t_from, t_to]`.
pub fn momentum_flatness(traj: &Trajectory, t_from: f64, t_to: f64) -> Option<f64> {
    let vals: Vec<f64> = traj.samples.iter().filter(|s| s.t >= t_from && s.t <= t_to && s.t > 0.0).map(scaled_momentum).collect();
    if vals.is_empty() {
        return None;
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    Some((hi - lo) / mean.abs())
}

/// `max | ‖V⊥‖ − κ/(t³r) | / (κ/(t³r))` over samples in `[t_from, t_to]`.
pub fn tangential_speed_residual(samples: &[FlowState], kappa: f64, t_from: f64, t_to: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    let mut worst = 0.0f64;
    for s in samples.iter().filter(|s| s.t >= t_from && s.t <= t_to && s.t > 0.0) {
        let r = s.radius();
        if r == 0.0 {
            continue;
        }
        // ‖V⊥‖ = |J| / r in the plane
        let v_perp = angular_momentum(s)?.abs() / r;
        let expected = kappa / (s.t.powi(3) * r);
        worst = worst.max((v_perp - expected).abs() / expected);
    }
    Ok(worst)
}

/// `ℰ = t²f(X) + ½‖2X + tV‖²`. Orbit-averaged samples use the orbit means
/// `t²⟨F⟩ + 2⟨r²⟩ + ½t²⟨‖V‖²⟩` (the mean of `X·V` over a closed orbit is zero).
pub fn lyapunov_energy(state: &FlowState, spec: &PotentialSpec) -> f64 {
    let t = state.t;
    if let Some(o) = &state.orbit {
        return t * t * o.mean_f + 2.0 * o.mean_r2 + 0.5 * t * t * o.mean_v2;
    }
    let f = spec.value_unchecked(&state.x);
    let w2: f64 = state.x.iter().zip(&state.v).map(|(x, v)| (2.0 * x + t * v).powi(2)).sum();
    t * t * f + 0.5 * w2
}

/// `𝒦 = t²f + ½t²‖V‖²` (the orbit value `t²E` on averaged samples).
pub fn kinetic_energy_functional(state: &FlowState, spec: &PotentialSpec) -> f64 {
    let t = state.t;
    match &state.orbit {
        Some(o) => t * t * o.energy,
        None => t * t * (spec.value_unchecked(&state.x) + 0.5 * state.speed_squared()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCheck {
    /// Largest sample-to-sample increase of `ℰ`, relative to `ℰ(first)`.
    pub max_rise: f64,
    /// Largest `(ℰ(t) − ℰ(first)) / ℰ(first)`; nonpositive when the bound holds.
    pub max_excess: f64,
}

pub fn energy_monotonicity(traj: &Trajectory, spec: &PotentialSpec) -> Option<EnergyCheck> {
    let first = traj.samples.first()?;
    let e0 = lyapunov_energy(first, spec);
    if !(e0 > 0.0) {
        return None;
    }
    let mut max_rise = 0.0f64;
    let mut max_excess = f64::NEG_INFINITY;
    let mut prev = e0;
    for s in &traj.samples[1..] {
        let e = lyapunov_energy(s, spec);
        max_rise = max_rise.max((e - prev) / e0);
        max_excess = max_excess.max((e - e0) / e0);
        prev = e;
    }
    Some(EnergyCheck { max_rise, max_excess: max_excess.max(f64::MIN) })
}

/// Centred-difference check of `𝒦' = 2t(f − ‖V‖²)` at interior samples,
/// normalised by `max(1, |2t(f − ‖V‖²)|)`.
pub fn kinetic_identity_residual(samples: &[FlowState], spec: &PotentialSpec) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::InsufficientSpan(format!("{} samples, need at least 3", samples.len())));
    }
    let k: Vec<f64> = samples.iter().map(|s| kinetic_energy_functional(s, spec)).collect();
    let mut worst = 0.0f64;
    for i in 1..samples.len() - 1 {
        let s = &samples[i];
        let lhs = (k[i + 1] - k[i - 1]) / (samples[i + 1].t - samples[i - 1].t);
        let rhs = 2.0 * s.t * (spec.value_unchecked(&s.x) - s.speed_squared());
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    Ok(worst)
}

/// Integral form of the same identity, `𝒦(t) − 𝒦(t_ref) = 2(ΔW_f − ΔW_v)`
/// with the accumulated `W_f = ∫τf`, `W_v = ∫τ‖V‖²`, from the first sample
/// with `t > 0`. Each sample's defect is divided by
/// `𝒦(t) + 𝒦(t_ref) + 2ΔW_f + 2ΔW_v`, the scale of the terms involved.
pub fn kinetic_integral_residual(samples: &[FlowState], spec: &PotentialSpec) -> Result<f64> {
    let live: Vec<&FlowState> = samples.iter().filter(|s| s.t > 0.0).collect();
    if live.len() < 2 {
        return Err(Error::InsufficientSpan("need two samples with t > 0".into()));
    }
    let r = live[0];
    let k_ref = kinetic_energy_functional(r, spec);
    let mut worst = 0.0f64;
    for s in &live[1..] {
        let k = kinetic_energy_functional(s, spec);
        let dwf = s.weighted_f - r.weighted_f;
        let dwv = s.weighted_v2 - r.weighted_v2;
        let defect = (k - k_ref) - 2.0 * (dwf - dwv);
        let scale = k.abs() + k_ref.abs() + 2.0 * (dwf.abs() + dwv.abs());
        if scale > 0.0 {
            worst = worst.max(defect.abs() / scale);
        }
    }
    Ok(worst)
}

/// One point for the rate envelopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub t: f64,
    pub f_low: f64,
    pub f_high: f64,
    pub r_high: Option<f64>,
}

impl RatePoint {
    pub fn from_state(s: &FlowState, spec: &PotentialSpec) -> Self {
        match &s.orbit {
            Some(o) => RatePoint { t: s.t, f_low: o.f_min, f_high: o.f_max, r_high: Some(o.r_max) },
            None => {
                let f = spec.value_unchecked(&s.x);
                RatePoint { t: s.t, f_low: f, f_high: f, r_high: Some(s.radius()) }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateConstants {
    /// `max t² f`
    pub c_f_upper: f64,
    /// `min t² log t · f`
    pub c_f_lower: f64,
    /// `max t² r / log t`, if radii are available.
    pub c_r_fit: Option<f64>,
    pub window: (f64, f64),
    /// `(k, min t² log t · f over [10^k, 10^{k+1}))` for each decade in the window.
    pub lower_by_decade: Vec<(i32, f64)>,
}

impl RateConstants {
    /// `(max − min) / max` of the per-decade lower constants.
    pub fn lower_variation(&self) -> Option<f64> {
        let vals: Vec<f64> = self.lower_by_decade.iter().map(|d| d.1).collect();
        if vals.len() < 2 {
            return None;
        }
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        Some((hi - lo) / hi)
    }
}

/// Envelope constants over the points with `t ∈ [lo, hi]`, `t > 1`.
/// The points must span at least two decades.
pub fn rate_fit_points(points: &[RatePoint], lo: f64, hi: f64) -> Result<RateConstants> {
    let inside: Vec<&RatePoint> = points.iter().filter(|p| p.t >= lo && p.t <= hi && p.t > 1.0).collect();
    let (t_first, t_last) = match (inside.first(), inside.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(Error::InsufficientSpan(format!("no samples in [{lo:e}, {hi:e}]"))),
    };
    if t_last < 100.0 * t_first * (1.0 - 1e-12) {
        return Err(Error::InsufficientSpan(format!("samples cover [{t_first:e}, {t_last:e}], need two decades")));
    }
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::INFINITY;
    let mut radius = None::<f64>;
    let mut decades: Vec<(i32, f64)> = Vec::new();
    for p in &inside {
        let t2 = p.t * p.t;
        let lt = p.t.ln();
        upper = upper.max(t2 * p.f_high);
        let low = t2 * lt * p.f_low;
        lower = lower.min(low);
        if let Some(r) = p.r_high {
            let c = t2 * r / lt;
            radius = Some(radius.map_or(c, |m| m.max(c)));
        }
        let k = (p.t.log10() + 1e-12).floor() as i32;
        // a decade counts only if it lies fully inside the samples
        if 10f64.powi(k) >= t_first * (1.0 - 1e-12) && 10f64.powi(k + 1) <= t_last * (1.0 + 1e-12) {
            match decades.last_mut() {
                Some((kk, m)) if *kk == k => *m = m.min(low),
                _ => decades.push((k, low)),
            }
        }
    }
    Ok(RateConstants { c_f_upper: upper, c_f_lower: lower, c_r_fit: radius, window: (t_first, t_last), lower_by_decade: decades })
}

pub fn rate_fit(traj: &Trajectory, spec: &PotentialSpec, lo: f64, hi: f64) -> Result<RateConstants> {
    let pts: Vec<RatePoint> = traj.samples.iter().map(|s| RatePoint::from_state(s, spec)).collect();
    rate_fit_points(&pts, lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecadeIncrement {
    pub k: i32,
    /// `arclength(10^{k+1}) − arclength(10^k)`
    pub increment: f64,
    /// `increment · log(10^k)`
    pub scaled: f64,
}

/// Arc-length increments over every full decade `[10^k, 10^{k+1}]` covered
/// by `(t, arclength)` pairs (sorted by `t`), by linear interpolation.
pub fn decade_arclength_points(points: &[(f64, f64)]) -> Vec<DecadeIncrement> {
    let live: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 > 0.0).collect();
    let (Some(first), Some(last)) = (live.first(), live.last()) else {
        return Vec::new();
    };
    let at = |t: f64| {
        let i = live.partition_point(|p| p.0 < t);
        if i < live.len() && live[i].0 == t {
            return live[i].1;
        }
        let (a, b) = (live[i - 1], live[i]);
        a.1 + (t - a.0) / (b.0 - a.0) * (b.1 - a.1)
    };
    let mut k = (first.0.log10() - 1e-12).ceil() as i32;
    let mut out = Vec::new();
    while 10f64.powi(k + 1) <= last.0 * (1.0 + 1e-12) {
        let (t0, t1) = (10f64.powi(k), 10f64.powi(k + 1));
        let increment = at(t1) - at(t0);
        out.push(DecadeIncrement { k, increment, scaled: increment * t0.ln() });
        k += 1;
    }
    out
}

pub fn decade_arclength_table(traj: &Trajectory) -> Vec<DecadeIncrement> {
    let pts: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, s.arclength)).collect();
    decade_arclength_points(&pts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedRow {
    pub k: i32,
    pub t: f64,
    pub weighted_f: f64,
    pub weighted_v2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTable {
    pub rows: Vec<WeightedRow>,
    /// Both partial integrals strictly increase from each decade to the next.
    pub strictly_increasing: bool,
    /// `|W_v − W_f| ≤ ½(𝒦(t_first) + max 𝒦)` at every sample.
    pub within_band: bool,
}

/// Partial integrals `∫τf`, `∫τ‖V‖²` at each power of ten inside the run.
pub fn weighted_divergence_table(traj: &Trajectory, spec: &PotentialSpec) -> WeightedTable {
    let live: Vec<&FlowState> = traj.samples.iter().filter(|s| s.t > 0.0).collect();
    let mut rows = Vec::new();
    if let (Some(first), Some(last)) = (live.first(), live.last()) {
        let mut k = (first.t.log10() - 1e-12).ceil() as i32;
        while 10f64.powi(k) <= last.t * (1.0 + 1e-12) {
            let t = 10f64.powi(k);
            let wf = crate::integrator::interpolate(&traj.samples, t, |s| s.weighted_f);
            let wv = crate::integrator::interpolate(&traj.samples, t, |s| s.weighted_v2);
            if let (Some(weighted_f), Some(weighted_v2)) = (wf, wv) {
                rows.push(WeightedRow { k, t, weighted_f, weighted_v2 });
            }
            k += 1;
        }
    }
    let strictly_increasing = rows.windows(2).all(|w| w[1].weighted_f > w[0].weighted_f && w[1].weighted_v2 > w[0].weighted_v2);
    let ks: Vec<f64> = live.iter().map(|s| kinetic_energy_functional(s, spec)).collect();
    let k_max = ks.iter().cloned().fold(0.0, f64::max);
    let band = 0.5 * (ks.first().copied().unwrap_or(0.0) + k_max);
    let within_band = live.iter().all(|s| (s.weighted_v2 - s.weighted_f).abs() <= band * (1.0 + 1e-9));
    WeightedTable { rows, strictly_increasing, within_band }
}

/// Options for [`DiagnosticsReport::compute`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiagnosticsOptions {
    /// Rate-fit window; `None` uses `[10², last sample]`.
    pub fit_window: Option<(f64, f64)>,
}

/// Everything the diagnostics can say about one Nesterov trajectory.
/// Fields are `None` when the check does not apply or the data are missing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsReport {
    pub kappa: Option<f64>,
    pub kappa_mean: Option<f64>,
    pub kappa_std: Option<f64>,
    pub t_rad_empirical: Option<f64>,
    pub torque_residual_max: Option<f64>,
    pub momentum_flatness: Option<f64>,
    pub tangential_residual_max: Option<f64>,
    pub energy_violation_max: Option<f64>,
    pub energy_excess_max: Option<f64>,
    pub kinetic_identity_residual: Option<f64>,
    pub c_f_upper: Option<f64>,
    pub c_f_lower: Option<f64>,
    pub c_r_fit: Option<f64>,
    pub fit_window: Option<(f64, f64)>,
    pub lower_decade_variation: Option<f64>,
    pub arclength_final: Option<f64>,
    pub decade_arclength: Vec<DecadeIncrement>,
    pub weighted_partials: Vec<WeightedRow>,
    pub weighted_increasing: Option<bool>,
    pub weighted_band: Option<bool>,
    /// Checks that could not run, with the reason.
    pub skipped: Vec<String>,
}

/// End of the Cartesian part that feeds the `κ` estimate.
fn cartesian_end(traj: &Trajectory) -> f64 {
    traj.events_of(EventKind::PolarHandoff)
        .next()
        .map(|e| e.t)
        .or_else(|| traj.samples.iter().rfind(|s| s.leg == Leg::Cartesian).map(|s| s.t))
        .unwrap_or(0.0)
}

impl DiagnosticsReport {
    /// Computes the report from the trajectory alone, so that a trajectory
    /// read back from disk yields the same numbers.
    pub fn compute(traj: &Trajectory, spec: &PotentialSpec, opts: &DiagnosticsOptions) -> Self {
        let mut rep = DiagnosticsReport::default();
        let Some(last) = traj.samples.last() else {
            rep.skipped.push("all: empty trajectory".into());
            return rep;
        };
        rep.arclength_final = Some(last.arclength);
        let planar = spec.dim() == 2;

        if let Some(a) = spec.radial_radius() {
            rep.t_rad_empirical = t_rad_empirical(traj, a);
        }
        if let PotentialSpec::Pathological { .. } = spec {
            match torque_balance(traj, spec, f64::INFINITY) {
                Ok((res, kappa)) => {
                    rep.torque_residual_max = Some(res);
                    rep.kappa = Some(kappa);
                }
                Err(e) => rep.skipped.push(format!("torque_balance: {e}")),
            }
        } else {
            rep.skipped.push("torque_balance: needs the pathological potential".into());
        }
        match rep.t_rad_empirical {
            Some(tr) if planar => {
                let hi = cartesian_end(traj);
                let est: Option<KappaEstimate> = estimate_kappa(traj, (hi / 10.0).max(tr), hi);
                rep.kappa_mean = est.map(|k| k.mean);
                rep.kappa_std = est.map(|k| k.std);
                rep.momentum_flatness = momentum_flatness(traj, tr.max(f64::MIN_POSITIVE), f64::INFINITY);
                match est.map(|k| k.mean) {
                    Some(k) if k > 0.0 => {
                        rep.tangential_residual_max = tangential_speed_residual(&traj.samples, k, tr.max(f64::MIN_POSITIVE), f64::INFINITY).ok();
                    }
                    _ => rep.skipped.push("tangential_speed_residual: needs kappa > 0".into()),
                }
            }
            _ => rep.skipped.push("angular momentum conservation: no radial entry".into()),
        }
        match energy_monotonicity(traj, spec) {
            Some(e) => {
                rep.energy_violation_max = Some(e.max_rise.max(0.0));
                rep.energy_excess_max = Some(e.max_excess);
            }
            None => rep.skipped.push("lyapunov_energy: zero initial energy".into()),
        }
        match kinetic_integral_residual(&traj.samples, spec) {
            Ok(r) => rep.kinetic_identity_residual = Some(r),
            Err(e) => rep.skipped.push(format!("kinetic_identity: {e}")),
        }
        let (lo, hi) = opts.fit_window.unwrap_or((1e2, last.t));
        match rate_fit(traj, spec, lo, hi) {
            Ok(rc) => {
                rep.lower_decade_variation = rc.lower_variation();
                rep.c_f_upper = Some(rc.c_f_upper);
                rep.c_f_lower = Some(rc.c_f_lower);
                rep.c_r_fit = rc.c_r_fit;
                rep.fit_window = Some(rc.window);
            }
            Err(e) => rep.skipped.push(format!("rate_fit: {e}")),
        }
        rep.decade_arclength = decade_arclength_table(traj);
        let w = weighted_divergence_table(traj, spec);
        rep.weighted_increasing = Some(w.strictly_increasing);
        rep.weighted_band = Some(w.within_band);
        rep.weighted_partials = w.rows;
        rep
    }

    /// Flat `key=value` block, one entry per line.
    pub fn to_key_values(&self) -> String {
        let num = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), crate::table::fmt_num);
        let flag = |v: Option<bool>| v.map_or_else(|| "NA".to_string(), |b| b.to_string());
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        put("kappa", num(self.kappa));
        put("kappa_mean", num(self.kappa_mean));
        put("kappa_std", num(self.kappa_std));
        put("t_rad_empirical", num(self.t_rad_empirical));
        put("torque_residual_max", num(self.torque_residual_max));
        put("momentum_flatness", num(self.momentum_flatness));
        put("tangential_residual_max", num(self.tangential_residual_max));
        put("energy_violation_max", num(self.energy_violation_max));
        put("energy_excess_max", num(self.energy_excess_max));
        put("kinetic_identity_residual", num(self.kinetic_identity_residual));
        put("c_f_upper", num(self.c_f_upper));
        put("c_f_lower", num(self.c_f_lower));
        put("c_r_fit", num(self.c_r_fit));
        put("fit_window_start", num(self.fit_window.map(|w| w.0)));
        put("fit_window_end", num(self.fit_window.map(|w| w.1)));
        put("lower_decade_variation", num(self.lower_decade_variation));
        put("arclength_final", num(self.arclength_final));
        put("weighted_increasing", flag(self.weighted_increasing));
        put("weighted_band", flag(self.weighted_band));
        for s in &self.skipped {
            put("skipped", s.clone());
        }
        out
    }

    /// `k  t_start  t_end  increment  scaled`
    pub fn decade_table_tsv(&self) -> String {
        let mut out = String::from("k\tt_start\tt_end\tincrement\tscaled\n");
        for d in &self.decade_arclength {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                d.k,
                crate::table::fmt_num(10f64.powi(d.k)),
                crate::table::fmt_num(10f64.powi(d.k + 1)),
                crate::table::fmt_num(d.increment),
                crate::table::fmt_num(d.scaled)
            );
        }
        out
    }

    /// `k  time  weighted_f  weighted_v2`
    pub fn weighted_table_tsv(&self) -> String {
        let mut out = String::from("k\ttime\tweighted_f\tweighted_v2\n");
        for w in &self.weighted_partials {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                w.k,
                crate::table::fmt_num(w.t),
                crate::table::fmt_num(w.weighted_f),
                crate::table::fmt_num(w.weighted_v2)
            );
        }
        out
    }

    /// Numeric fields by name, for comparisons between reports.
    pub fn scalars(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("kappa", self.kappa),
            ("kappa_mean", self.kappa_mean),
            ("kappa_std", self.kappa_std),
            ("t_rad_empirical", self.t_rad_empirical),
            ("torque_residual_max", self.torque_residual_max),
            ("momentum_flatness", self.momentum_flatness),
            ("tangential_residual_max", self.tangential_residual_max),
            ("energy_violation_max", self.energy_violation_max),
            ("energy_excess_max", self.energy_excess_max),
            ("kinetic_identity_residual", self.kinetic_identity_residual),
            ("c_f_upper", self.c_f_upper),
            ("c_f_lower", self.c_f_lower),
            ("c_r_fit", self.c_r_fit),
            ("lower_decade_variation", self.lower_decade_variation),
            ("arclength_final", self.arclength_final),
        ]
    }
}
