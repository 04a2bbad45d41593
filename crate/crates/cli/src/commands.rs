use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use nesterov_flow::diagnostics::{DiagnosticsOptions, DiagnosticsReport};
use nesterov_flow::integrator::{integrate_gradient_flow, run_nesterov, EventKind, SampleSchedule, Trajectory};
use nesterov_flow::oracles::{QuadraticOracle, QuadraticSpec};
use nesterov_flow::potential::{parse_number_list, parse_row_major_matrix, PotentialSpec};
use nesterov_flow::table::{self, Loaded};
use nesterov_flow::{Error, IntegrationError};

use crate::config::{sibling, Flow, OutPaths, RunConfig};
use crate::{Failure, OracleArgs, RunArgs, SweepArgs};

pub const FIG2_ORBIT: &str = "nesterov_static_orbit_eps50.tsv";
pub const FIG2_SERIES: &str = "nesterov_static_series_eps50.tsv";

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn lib_err(e: Error) -> Failure {
    match e {
        Error::Schema(m) => Failure::Schema(m),
        other => Failure::Parse(other.to_string()),
    }
}

fn integration_err(e: &IntegrationError) -> Failure {
    Failure::Integration { tag: e.kind.tag(), message: e.to_string() }
}

/// Arc-length sampling for the orbit file: a few hundred points per `‖X0‖`
/// of path.
fn arc_spacing(x0: &[f64]) -> Option<f64> {
    let r = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    (r > 0.0).then_some(r / 400.0)
}

/// What a finished (or failed) run leaves behind.
pub struct RunOutput {
    pub summary: String,
    pub report: Option<DiagnosticsReport>,
    pub failure: Option<Failure>,
}

/// Integrates `cfg`, writes every table (partial ones on failure) and the
/// report, and returns the summary block.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, Failure> {
    let mut icfg = cfg.integrator.clone();
    icfg.arc_spacing = arc_spacing(&cfg.x0);
    let clock = Instant::now();
    let mut notes = Vec::new();
    let result = match cfg.flow {
        Flow::Nesterov => run_nesterov(&cfg.potential, &cfg.x0, &icfg, cfg.plan).map(|run| {
            notes = run.notes;
            run.trajectory
        }),
        Flow::Gradient => integrate_gradient_flow(&cfg.potential, &cfg.x0, &icfg),
    };
    let (trajectory, failure) = match result {
        Ok(t) => (t, None),
        Err(e) => {
            let f = integration_err(&e);
            (*e.partial, Some(f))
        }
    };
    for n in &notes {
        eprintln!("note: {n}");
    }
    eprintln!("steps={} elapsed={:.1}s", trajectory.steps, clock.elapsed().as_secs_f64());

    let spec = &cfg.potential;
    write_file(&cfg.out.orbit, &table::orbit_tsv(&trajectory))?;
    write_file(&cfg.out.series, &table::series_tsv(&trajectory, spec))?;
    write_file(&cfg.out.diag, &table::diag_tsv(&trajectory, spec))?;
    write_file(&cfg.out.events(), &table::events_tsv(&trajectory))?;

    let mut summary = String::new();
    let mut report = None;
    match cfg.flow {
        Flow::Nesterov => {
            // the report is computed from exactly what the files hold
            let rep = DiagnosticsReport::compute(&table::quantized(&trajectory), spec, &DiagnosticsOptions::default());
            summary.push_str(&rep.to_key_values());
            if let PotentialSpec::Quadratic(q) = spec {
                let err = oracle_error(q, &cfg.x0, &trajectory).map_err(lib_err)?;
                let _ = writeln!(summary, "oracle_max_position_error={}", table::fmt_num(err));
            }
            report = Some(rep);
        }
        Flow::Gradient => {
            let hit = trajectory.events_of(EventKind::MinimizerReached).next().map(|e| e.t);
            let last = trajectory.last();
            let _ = writeln!(summary, "flow=gradient");
            let _ = writeln!(summary, "terminated={}", if hit.is_some() { "MinimizerReached" } else { "none" });
            let _ = writeln!(summary, "hit_time={}", hit.map_or("NA".into(), table::fmt_num));
            let _ = writeln!(summary, "arclength_final={}", last.map_or("NA".into(), |s| table::fmt_num(s.arclength)));
        }
    }
    let mut file = summary.clone();
    if let Some(rep) = &report {
        file.push('\n');
        file.push_str(&rep.decade_table_tsv());
        file.push('\n');
        file.push_str(&rep.weighted_table_tsv());
    }
    write_file(&cfg.out.report(), &file)?;
    Ok(RunOutput { summary, report, failure })
}

/// Largest position error of the samples against the closed form.
fn oracle_error(q: &QuadraticSpec, x0: &[f64], traj: &Trajectory) -> nesterov_flow::Result<f64> {
    let oracle = QuadraticOracle::new(q, x0)?;
    Ok(traj
        .samples
        .iter()
        .map(|s| {
            let (x, _) = oracle.state_at(s.t);
            x.iter().zip(&s.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max))
}

fn finish(out: RunOutput) -> Result<(), Failure> {
    print!("{}", out.summary);
    match out.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

pub fn simulate(args: &RunArgs) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(args, "series.tsv", "orbit.tsv")?;
    finish(execute(&cfg)?)
}

pub fn fig2_config(out_dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_map(&Default::default(), FIG2_SERIES, FIG2_ORBIT).expect("defaults are valid");
    let series = out_dir.join(FIG2_SERIES);
    cfg.out = OutPaths::from_series(out_dir.join(FIG2_ORBIT), series, None);
    cfg
}

pub fn reproduce_fig2(out_dir: &Path) -> Result<(), Failure> {
    finish(execute(&fig2_config(out_dir))?)
}

pub fn diagnose(file: &Path, events: Option<&Path>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(file).map_err(|e| io_err(file, e))?;
    match table::load_trajectory(&text).map_err(lib_err)? {
        Loaded::Full { spec, mut trajectory } => {
            let spec = spec.ok_or_else(|| Failure::Schema("diag table lacks its `# potential=...` line".into()))?;
            let events_path = events.map(Path::to_path_buf).or_else(|| default_events_path(file));
            match events_path {
                Some(p) if p.exists() || events.is_some() => {
                    let ev = std::fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
                    trajectory.events = table::load_events(&ev).map_err(lib_err)?;
                }
                _ => eprintln!("note: no events table; radial entry and handoff times are unknown"),
            }
            let rep = DiagnosticsReport::compute(&trajectory, &spec, &DiagnosticsOptions::default());
            print!("{}", rep.to_key_values());
        }
        Loaded::Series(rows) => print!("{}", series_report(&rows)),
    }
    Ok(())
}

/// `x_diag.tsv` → `x_events.tsv`.
fn default_events_path(file: &Path) -> Option<PathBuf> {
    let stem = file.file_stem()?.to_string_lossy();
    let base = stem.strip_suffix("_diag")?;
    Some(file.with_file_name(format!("{base}.tsv"))).map(|p| sibling(&p, "events"))
}

/// What a `time  f_value  arclength` table alone supports.
fn series_report(rows: &[(f64, f64, f64)]) -> String {
    use nesterov_flow::diagnostics::{decade_arclength_points, rate_fit_points, RatePoint};
    let mut out = String::new();
    let num = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), table::fmt_num);
    let points: Vec<RatePoint> = rows.iter().map(|&(t, f, _)| RatePoint { t, f_low: f, f_high: f, r_high: None }).collect();
    let last_t = rows.last().map_or(0.0, |r| r.0);
    let fit = rate_fit_points(&points, 1e2, last_t);
    let _ = writeln!(out, "arclength_final={}", num(rows.last().map(|r| r.2)));
    match &fit {
        Ok(rc) => {
            let _ = writeln!(out, "c_f_upper={}", table::fmt_num(rc.c_f_upper));
            let _ = writeln!(out, "c_f_lower={}", table::fmt_num(rc.c_f_lower));
            let _ = writeln!(out, "lower_decade_variation={}", num(rc.lower_variation()));
        }
        Err(e) => {
            let _ = writeln!(out, "skipped=rate_fit: {e}");
        }
    }
    let arc: Vec<(f64, f64)> = rows.iter().map(|&(t, _, s)| (t, s)).collect();
    for d in decade_arclength_points(&arc) {
        let _ = writeln!(out, "decade_increment_{}={}", d.k, table::fmt_num(d.increment));
    }
    for check in ["torque_balance", "momentum_flatness", "lyapunov_energy", "kinetic_identity", "weighted_divergence"] {
        let _ = writeln!(out, "skipped={check}: needs the state and accumulator columns of a diag table");
    }
    out
}

pub fn oracle(args: &OracleArgs) -> Result<(), Failure> {
    let q = match (&args.matrix, &args.lambda) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            parse_row_major_matrix(&text).map_err(lib_err)?
        }
        (None, Some(l)) => QuadraticSpec::diagonal(&parse_number_list(l).map_err(lib_err)?).map_err(lib_err)?,
        (None, None) => return Err(Failure::Parse("oracle needs --lambda or --matrix".into())),
    };
    let x0 = match &args.x0 {
        Some(t) => parse_number_list(t).map_err(lib_err)?,
        None => vec![1.0; q.dim()],
    };
    if !(args.t_end > 0.0 && args.t_first > 0.0 && args.t_first < args.t_end && args.per_decade > 0) {
        return Err(Failure::Parse("need 0 < t_first < t_end and per_decade > 0".into()));
    }
    let oracle = QuadraticOracle::new(&q, &x0).map_err(lib_err)?;
    let d = q.dim();
    let mut times = vec![0.0];
    times.extend(SampleSchedule::LogUniform { per_decade: args.per_decade }.times(args.t_first / 10f64.powf(1.0 / args.per_decade as f64), args.t_end));

    let mut out = String::from("time");
    for prefix in ["x", "v"] {
        for i in 1..=d {
            let _ = write!(out, "\t{prefix}{i}");
        }
    }
    out.push_str("\tarclength\n");
    for &t in &times {
        let (x, v) = oracle.state_at(t);
        let s = if t > 0.0 { oracle.arclength(t).map_err(lib_err)?.value } else { 0.0 };
        let cells: Vec<String> = std::iter::once(t).chain(x).chain(v).chain(std::iter::once(s)).map(table::fmt_num).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    let tail = oracle.arclength(args.t_end).map_err(lib_err)?.tail_bound;
    match &args.out {
        Some(path) => {
            write_file(path, &out)?;
            println!("arclength_tail_bound={}", table::fmt_num(tail));
        }
        None => {
            print!("{out}");
            eprintln!("arclength_tail_bound={}", table::fmt_num(tail));
        }
    }
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let list = |text: &Option<String>, single: Option<f64>| -> Result<Vec<Option<f64>>, Failure> {
        match text {
            Some(t) => Ok(parse_number_list(t).map_err(lib_err)?.into_iter().map(Some).collect()),
            None => Ok(vec![single]),
        }
    };
    let eps_values = list(&args.eps_list, args.run.eps)?;
    let a_values = list(&args.a_list, args.run.a)?;
    let mut configs = Vec::new();
    for &a in &a_values {
        for &eps in &eps_values {
            let mut run = args.run.clone();
            run.a = a;
            run.eps = eps;
            let mut cfg = RunConfig::resolve(&run, "series.tsv", "orbit.tsv")?;
            let tag = match cfg.potential {
                PotentialSpec::Pathological { a, eps } => format!("a{a}_eps{eps}"),
                _ => format!("run{}", configs.len()),
            };
            let series = args.out_dir.join(format!("sweep_{tag}_series.tsv"));
            cfg.out = OutPaths::from_series(args.out_dir.join(format!("sweep_{tag}_orbit.tsv")), series, None);
            configs.push((tag, cfg));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| Failure::Parse(format!("jobs: {e}")))?;
    let results: Vec<Result<RunOutput, Failure>> = pool.install(|| configs.par_iter().map(|(_, cfg)| execute(cfg)).collect());

    println!("run\tkappa\tarclength_final\tc_f_upper\tstatus");
    let mut first_failure = None;
    for ((tag, _), res) in configs.iter().zip(results) {
        let num = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), table::fmt_num);
        match res {
            Ok(out) => {
                let rep = out.report.unwrap_or_default();
                let status = out.failure.as_ref().map_or("ok".to_string(), |f| f.to_string());
                println!("{tag}\t{}\t{}\t{}\t{status}", num(rep.kappa), num(rep.arclength_final), num(rep.c_f_upper));
                if first_failure.is_none() {
                    first_failure = out.failure;
                }
            }
            Err(f) => {
                println!("{tag}\tNA\tNA\tNA\t{f}");
                first_failure.get_or_insert(f);
            }
        }
    }
    match first_failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}
