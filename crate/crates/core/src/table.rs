//! Tab-separated trajectory tables.
//!
//! Every number is written in scientific notation with 12 significant
//! digits; lines end in LF. Three schemas:
//!
//! - orbit: `x1  x2`
//! - series: `time  f_value  arclength`
//! - diag: full state, accumulators, derived columns and orbit averages,
//!   preceded by a `# potential=...` line so it can be re-read on its own.

use std::fmt::Write as _;

use crate::diagnostics::lyapunov_energy;
use crate::error::{Error, Result};
use crate::integrator::{Event, EventKind, FlowState, Leg, OrbitAverages, SampleOrigin, Trajectory};
use crate::potential::PotentialSpec;

pub const ORBIT_HEADER: &str = "x1\tx2";
pub const SERIES_HEADER: &str = "time\tf_value\tarclength";
pub const EVENTS_HEADER: &str = "time\tevent";

const ORBIT_COLUMNS: [&str; 12] = [
    "orbit_energy",
    "orbit_momentum",
    "r_min",
    "r_max",
    "period",
    "mean_f",
    "mean_v2",
    "mean_speed",
    "mean_r2",
    "mean_inv_r2",
    "f_min",
    "f_max",
];

/// Scientific notation with 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        "NA".to_string()
    }
}

/// Rounds `v` exactly as writing and re-reading a cell would.
pub fn quantize(v: f64) -> f64 {
    if v.is_finite() {
        format!("{v:.11e}").parse().expect("formatted float parses")
    } else {
        v
    }
}

fn sample_f(s: &FlowState, spec: &PotentialSpec) -> f64 {
    s.orbit.map_or_else(|| spec.value_unchecked(&s.x), |o| o.mean_f)
}

/// Pointwise samples only: averaged samples have no definite position.
pub fn orbit_tsv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(32 * traj.samples.len());
    out.push_str(ORBIT_HEADER);
    out.push('\n');
    for s in traj.samples.iter().filter(|s| s.orbit.is_none() && s.x.len() >= 2) {
        let _ = writeln!(out, "{}\t{}", fmt_num(s.x[0]), fmt_num(s.x[1]));
    }
    out
}

/// Samples with `t > 0` (the table is meant for log-time axes), leaving out
/// the extra arc-length samples. Beyond the averaging switch `f_value` is the
/// orbit mean `⟨F⟩`.
pub fn series_tsv(traj: &Trajectory, spec: &PotentialSpec) -> String {
    let mut out = String::with_capacity(56 * traj.samples.len());
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for s in traj.samples.iter().filter(|s| s.t > 0.0 && s.origin != SampleOrigin::Arclength) {
        let _ = writeln!(out, "{}\t{}\t{}", fmt_num(s.t), fmt_num(sample_f(s, spec)), fmt_num(s.arclength));
    }
    out
}

pub fn events_tsv(traj: &Trajectory) -> String {
    let mut out = String::from(EVENTS_HEADER);
    out.push('\n');
    for e in &traj.events {
        let _ = writeln!(out, "{}\t{}", fmt_num(e.t), e.kind.name());
    }
    out
}

pub fn diag_header(d: usize) -> String {
    let mut cols: Vec<String> = vec!["time".into()];
    cols.extend((1..=d).map(|i| format!("x{i}")));
    cols.extend((1..=d).map(|i| format!("v{i}")));
    for c in ["f_value", "arclength", "torque_integral", "weighted_f", "weighted_v2", "leg", "J", "t3J", "lyapunov"] {
        cols.push(c.into());
    }
    cols.extend(ORBIT_COLUMNS.iter().map(|c| c.to_string()));
    cols.join("\t")
}

/// Full table; the first line records the potential.
pub fn diag_tsv(traj: &Trajectory, spec: &PotentialSpec) -> String {
    let d = spec.dim();
    let mut out = String::with_capacity(400 * traj.samples.len());
    let _ = writeln!(out, "# {spec}");
    out.push_str(&diag_header(d));
    out.push('\n');
    for s in &traj.samples {
        let mut cells: Vec<String> = Vec::with_capacity(2 * d + 22);
        cells.push(fmt_num(s.t));
        cells.extend(s.x.iter().chain(&s.v).map(|v| fmt_num(*v)));
        cells.push(fmt_num(sample_f(s, spec)));
        cells.push(fmt_num(s.arclength));
        cells.push(fmt_num(s.torque_integral));
        cells.push(fmt_num(s.weighted_f));
        cells.push(fmt_num(s.weighted_v2));
        cells.push(s.leg.code().to_string());
        if d == 2 {
            let j = s.x[0] * s.v[1] - s.x[1] * s.v[0];
            cells.push(fmt_num(j));
            cells.push(fmt_num(s.t.powi(3) * j));
        } else {
            cells.push("NA".into());
            cells.push("NA".into());
        }
        cells.push(fmt_num(lyapunov_energy(s, spec)));
        match &s.orbit {
            Some(o) => cells.extend(
                [
                    o.energy,
                    o.angular_momentum,
                    o.r_min,
                    o.r_max,
                    o.period,
                    o.mean_f,
                    o.mean_v2,
                    o.mean_speed,
                    o.mean_r2,
                    o.mean_inv_r2,
                    o.f_min,
                    o.f_max,
                ]
                .iter()
                .map(|v| fmt_num(*v)),
            ),
            None => cells.extend(std::iter::repeat_n("NA".to_string(), ORBIT_COLUMNS.len())),
        }
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

/// A parsed tab-separated table. Lines starting with `#` before the header
/// are kept as comments.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Table> {
        let mut comments = Vec::new();
        let mut lines = text.lines();
        let header = loop {
            match lines.next() {
                Some(l) if l.starts_with('#') => comments.push(l.trim_start_matches('#').trim().to_string()),
                Some(l) if l.trim().is_empty() => continue,
                Some(l) => break l.split('\t').map(|c| c.trim().to_string()).collect::<Vec<_>>(),
                None => return Err(Error::Schema("missing header row".into())),
            }
        };
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            if l.trim().is_empty() {
                continue;
            }
            let row: Vec<String> = l.split('\t').map(|c| c.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(Error::Schema(format!("row {} has {} cells, header has {}", i + 1, row.len(), header.len())));
            }
            rows.push(row);
        }
        Ok(Table { comments, header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn num(&self, row: usize, col: usize) -> Result<Option<f64>> {
        let cell = &self.rows[row][col];
        if cell == "NA" {
            return Ok(None);
        }
        cell.parse::<f64>()
            .map(Some)
            .map_err(|_| Error::Schema(format!("row {}, column {}: not a number: {cell:?}", row + 1, self.header[col])))
    }

    /// All values of a numeric column; `NA` is rejected.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name).ok_or_else(|| Error::Schema(format!("missing column {name:?}")))?;
        (0..self.rows.len())
            .map(|r| self.num(r, c)?.ok_or_else(|| Error::Schema(format!("row {}: {name} is NA", r + 1))))
            .collect()
    }
}

/// What a trajectory file turned out to contain.
#[derive(Debug, Clone)]
pub enum Loaded {
    /// A diag table: full samples, plus the potential from its comment line.
    Full { spec: Option<PotentialSpec>, trajectory: Trajectory },
    /// A series table: `(time, f_value, arclength)` rows only.
    Series(Vec<(f64, f64, f64)>),
}

/// Reads a diag or series table, recognised by its header.
pub fn load_trajectory(text: &str) -> Result<Loaded> {
    let table = Table::parse(text)?;
    if table.header.join("\t") == SERIES_HEADER {
        let t = table.numbers("time")?;
        let f = table.numbers("f_value")?;
        let s = table.numbers("arclength")?;
        return Ok(Loaded::Series(t.into_iter().zip(f).zip(s).map(|((a, b), c)| (a, b, c)).collect()));
    }
    let d = (1..).take_while(|i| table.column(&format!("x{i}")).is_some()).count();
    if d == 0 || table.header.join("\t") != diag_header(d) {
        return Err(Error::Schema(format!("unrecognised header: {}", table.header.join(" | "))));
    }
    let spec = match table.comments.iter().find(|c| c.starts_with("potential=")) {
        Some(c) => Some(PotentialSpec::parse(c)?),
        None => None,
    };
    let col = |name: &str| table.column(name).expect("header checked");
    let mut samples = Vec::with_capacity(table.rows.len());
    for r in 0..table.rows.len() {
        let need = |name: &str| -> Result<f64> {
            table.num(r, col(name))?.ok_or_else(|| Error::Schema(format!("row {}: {name} is NA", r + 1)))
        };
        let leg_code = table.rows[r][col("leg")].parse::<u8>().ok().and_then(Leg::from_code);
        let leg = leg_code.ok_or_else(|| Error::Schema(format!("row {}: bad leg code", r + 1)))?;
        let orbit = if leg == Leg::Averaged {
            let v: Vec<f64> = ORBIT_COLUMNS.iter().map(|c| need(c)).collect::<Result<_>>()?;
            Some(OrbitAverages {
                energy: v[0],
                angular_momentum: v[1],
                r_min: v[2],
                r_max: v[3],
                period: v[4],
                mean_f: v[5],
                mean_v2: v[6],
                mean_speed: v[7],
                mean_r2: v[8],
                mean_inv_r2: v[9],
                f_min: v[10],
                f_max: v[11],
            })
        } else {
            None
        };
        samples.push(FlowState {
            t: need("time")?,
            x: (1..=d).map(|i| need(&format!("x{i}"))).collect::<Result<_>>()?,
            v: (1..=d).map(|i| need(&format!("v{i}"))).collect::<Result<_>>()?,
            arclength: need("arclength")?,
            torque_integral: need("torque_integral")?,
            weighted_f: need("weighted_f")?,
            weighted_v2: need("weighted_v2")?,
            leg,
            origin: SampleOrigin::Schedule,
            orbit,
        });
    }
    if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::Schema("sample times must increase strictly".into()));
    }
    Ok(Loaded::Full { spec, trajectory: Trajectory { samples, events: Vec::new(), steps: 0 } })
}

pub fn load_events(text: &str) -> Result<Vec<Event>> {
    let table = Table::parse(text)?;
    if table.header.join("\t") != EVENTS_HEADER {
        return Err(Error::Schema(format!("expected header {EVENTS_HEADER:?}")));
    }
    let times = table.numbers("time")?;
    table
        .rows
        .iter()
        .zip(times)
        .map(|(row, t)| {
            EventKind::from_name(&row[1]).map(|kind| Event { t, kind }).ok_or_else(|| Error::Schema(format!("unknown event {:?}", row[1])))
        })
        .collect()
}

/// The trajectory as it reads back from its diag and events tables.
pub fn quantized(traj: &Trajectory) -> Trajectory {
    let q = quantize;
    Trajectory {
        samples: traj
            .samples
            .iter()
            .map(|s| FlowState {
                t: q(s.t),
                x: s.x.iter().map(|v| q(*v)).collect(),
                v: s.v.iter().map(|v| q(*v)).collect(),
                arclength: q(s.arclength),
                torque_integral: q(s.torque_integral),
                weighted_f: q(s.weighted_f),
                weighted_v2: q(s.weighted_v2),
                leg: s.leg,
                origin: SampleOrigin::Schedule,
                orbit: s.orbit.map(|o| OrbitAverages {
                    energy: q(o.energy),
                    angular_momentum: q(o.angular_momentum),
                    r_min: q(o.r_min),
                    r_max: q(o.r_max),
                    period: q(o.period),
                    mean_f: q(o.mean_f),
                    mean_v2: q(o.mean_v2),
                    mean_speed: q(o.mean_speed),
                    mean_r2: q(o.mean_r2),
                    mean_inv_r2: q(o.mean_inv_r2),
                    f_min: q(o.f_min),
                    f_max: q(o.f_max),
                }),
            })
            .collect(),
        events: traj.events.iter().map(|e| Event { t: q(e.t), kind: e.kind }).collect(),
        steps: 0,
    }
}
