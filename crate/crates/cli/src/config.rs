//! Run configuration: Figure-2 defaults, overridden by an optional
//! `key=value` file, overridden in turn by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nesterov_flow::integrator::{IntegratorConfig, LegPlan};
use nesterov_flow::potential::{parse_number_list, PotentialSpec};

use crate::{Failure, RunArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Nesterov,
    Gradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutPaths {
    pub orbit: PathBuf,
    pub series: PathBuf,
    pub diag: PathBuf,
}

impl OutPaths {
    /// `<stem>_diag.tsv` next to the series file unless given explicitly.
    pub fn from_series(orbit: PathBuf, series: PathBuf, diag: Option<PathBuf>) -> Self {
        let diag = diag.unwrap_or_else(|| sibling(&series, "diag"));
        OutPaths { orbit, series, diag }
    }

    pub fn events(&self) -> PathBuf {
        sibling(&self.series, "events")
    }

    pub fn report(&self) -> PathBuf {
        sibling(&self.series, "report").with_extension("txt")
    }
}

/// `dir/name.tsv` → `dir/name_<suffix>.tsv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "tsv".into());
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub x0: Vec<f64>,
    pub integrator: IntegratorConfig,
    pub flow: Flow,
    pub plan: LegPlan,
    pub out: OutPaths,
}

/// Reads `key=value` lines; `#` starts a comment, blank lines are skipped.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, Failure> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Parse(format!("config line {}: expected key=value, got {raw:?}", n + 1)))?;
        let key = k.trim().replace('-', "_");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Failure::Parse(format!("config line {}: unknown key {key:?}", n + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

const KNOWN_KEYS: [&str; 16] = [
    "potential",
    "a",
    "eps",
    "lambda",
    "matrix",
    "x0",
    "flow",
    "t0",
    "t_end",
    "rtol",
    "atol",
    "polar_handoff",
    "average_after",
    "out_orbit",
    "out_series",
    "out_diag",
];

fn number(key: &str, value: &str) -> Result<f64, Failure> {
    value.trim().parse::<f64>().map_err(|_| Failure::Parse(format!("{key}: not a number: {value:?}")))
}

/// `none`/`off` disables a leg switch.
fn optional_time(key: &str, value: &str) -> Result<Option<f64>, Failure> {
    match value.trim().to_ascii_lowercase().as_str() {
        "none" | "off" => Ok(None),
        v => number(key, v).map(Some),
    }
}

impl RunConfig {
    /// Merges flags over the file over the defaults and validates the result.
    pub fn resolve(args: &RunArgs, default_series: &str, default_orbit: &str) -> Result<Self, Failure> {
        let mut kv = match &args.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        let flags: [(&str, Option<String>); 16] = [
            ("potential", args.potential.clone()),
            ("a", args.a.map(|v| v.to_string())),
            ("eps", args.eps.map(|v| v.to_string())),
            ("lambda", args.lambda.clone()),
            ("matrix", None),
            ("x0", args.x0.clone()),
            ("flow", args.flow.clone()),
            ("t0", args.t0.map(|v| v.to_string())),
            ("t_end", args.t_end.map(|v| v.to_string())),
            ("rtol", args.rtol.map(|v| v.to_string())),
            ("atol", args.atol.map(|v| v.to_string())),
            ("polar_handoff", args.polar_handoff.clone()),
            ("average_after", args.average_after.clone()),
            ("out_orbit", args.out_orbit.as_ref().map(|p| p.display().to_string())),
            ("out_series", args.out_series.as_ref().map(|p| p.display().to_string())),
            ("out_diag", args.out_diag.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                kv.insert(k.to_string(), v);
            }
        }
        if let Some(path) = &args.matrix {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            kv.insert("matrix".into(), text.split_whitespace().collect::<Vec<_>>().join(","));
        }
        Self::from_map(&kv, default_series, default_orbit)
    }

    pub fn from_map(kv: &BTreeMap<String, String>, default_series: &str, default_orbit: &str) -> Result<Self, Failure> {
        let get = |k: &str| kv.get(k).map(String::as_str);
        let potential = PotentialSpec::from_pairs(
            ["potential", "a", "eps", "lambda", "matrix"].iter().filter_map(|k| get(k).map(|v| (*k, v))),
        )
        .map_err(|e| Failure::Parse(e.to_string()))?;

        let x0 = match get("x0") {
            Some(text) => parse_number_list(text).map_err(|e| Failure::Parse(format!("x0: {e}")))?,
            None => match potential {
                PotentialSpec::Pathological { a, .. } => vec![2.0 * a, a],
                PotentialSpec::PureRadial => vec![0.04, 0.02],
                PotentialSpec::Quadratic(ref q) => vec![1.0; q.dim()],
            },
        };
        potential.check_dim(&x0).map_err(|e| Failure::Parse(format!("x0: {e}")))?;
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Failure::Parse("x0 must be finite".into()));
        }

        let flow = match get("flow").map(str::to_ascii_lowercase).as_deref() {
            None | Some("nesterov") => Flow::Nesterov,
            Some("gradient") => Flow::Gradient,
            Some(other) => return Err(Failure::Parse(format!("flow must be nesterov or gradient, got {other:?}"))),
        };

        let mut integrator = IntegratorConfig::default();
        if let Some(v) = get("t0") {
            integrator.t0 = number("t0", v)?;
        }
        if let Some(v) = get("t_end") {
            integrator.t_end = number("t_end", v)?;
        }
        if let Some(v) = get("rtol") {
            integrator.rel_tol = number("rtol", v)?;
        }
        if let Some(v) = get("atol") {
            integrator.abs_tol = number("atol", v)?;
        }
        integrator.validate().map_err(|e| Failure::Parse(e.to_string()))?;

        let mut plan = LegPlan::default();
        if let Some(v) = get("polar_handoff") {
            plan.polar_handoff = optional_time("polar_handoff", v)?;
        }
        if let Some(v) = get("average_after") {
            plan.average_after = optional_time("average_after", v)?;
        }

        let path = |k: &str, default: &str| PathBuf::from(get(k).unwrap_or(default));
        let out = OutPaths::from_series(path("out_orbit", default_orbit), path("out_series", default_series), get("out_diag").map(PathBuf::from));
        Ok(RunConfig { potential, x0, integrator, flow, plan, out })
    }
}
