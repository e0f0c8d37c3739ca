//! Batch execution and on-disk artifacts.
//!
//! A run directory holds one CSV per run and loop, a summary table and a
//! `metadata.json` echoing the resolved spec. Every CSV starts with `# key=value`
//! provenance lines (the flattened resolved run config) followed by the column
//! header row.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::config::{ExperimentSpec, ReportFormat, RunSpec, SimConfig};
use crate::metrics::{compute_rms_error, compute_step_metrics, ResponseMetrics};
use crate::network::PRNG_ALGORITHM;
use crate::sim::{run_scenario, LoopTrace, SimError, Trajectory};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub const CSV_COLUMNS: [&str; 11] = [
    "t", "setpoint", "output", "error", "control", "kp", "ki", "kd", "rho_p", "rho_i", "rho_d",
];

#[derive(Debug, Error)]
#[error("I/O error on {path}: {source}")]
pub struct IoError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

/// Process exit status of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ValidationError = 1,
    Diverged = 2,
    IoError = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Metrics row for one loop of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub controller: String,
    pub tau: f64,
    pub seed: u64,
    pub loop_name: String,
    pub metrics: ResponseMetrics,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub run: RunSpec,
    pub result: Result<Vec<SummaryRow>, SimError>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunOutcome>,
    pub summary_path: PathBuf,
    pub metadata_path: PathBuf,
}

impl ExperimentOutcome {
    pub fn rows(&self) -> Vec<&SummaryRow> {
        self.runs
            .iter()
            .filter_map(|r| r.result.as_ref().ok())
            .flatten()
            .collect()
    }

    pub fn status(&self) -> ExitStatus {
        if self.runs.iter().any(|r| r.result.is_err()) {
            ExitStatus::Diverged
        } else {
            ExitStatus::Success
        }
    }
}

/// Formats a float with 12 significant digits, trimming trailing zeros.
pub fn format_sig(x: f64) -> String {
    const SIG: i32 = 12;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG).contains(&exp) {
        let fixed = format!("{:.*}", (SIG - 1 - exp).max(0) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn flatten_json(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_json(&key, v, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// `key=value` provenance pairs for a run configuration.
pub fn provenance(cfg: &SimConfig) -> Vec<(String, String)> {
    let mut out = vec![
        ("version".to_string(), CODE_VERSION.to_string()),
        ("prng".to_string(), PRNG_ALGORITHM.to_string()),
    ];
    let value = serde_json::to_value(cfg).expect("config serializes");
    flatten_json("", &value, &mut out);
    out
}

/// Reads the `# key=value` lines at the top of an artifact.
pub fn parse_header(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map_while(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn write_header(buf: &mut String, pairs: &[(String, String)]) {
    for (k, v) in pairs {
        buf.push_str("# ");
        buf.push_str(k);
        buf.push('=');
        buf.push_str(v);
        buf.push('\n');
    }
}

/// Renders one loop trace as CSV text with provenance header.
pub fn loop_csv(run_id: &str, cfg: &SimConfig, trace: &LoopTrace) -> String {
    let mut header = vec![
        ("run_id".to_string(), run_id.to_string()),
        ("loop".to_string(), trace.name.to_string()),
    ];
    header.extend(provenance(cfg));
    let mut buf = String::with_capacity(trace.records.len() * 160);
    write_header(&mut buf, &header);
    buf.push_str(&CSV_COLUMNS.join(","));
    buf.push('\n');
    for r in &trace.records {
        let fields = [
            r.t, r.setpoint, r.output, r.error, r.control, r.gains.kp, r.gains.ki, r.gains.kd,
            r.rho.p, r.rho.i, r.rho.d,
        ];
        let line: Vec<String> = fields.iter().map(|&v| format_sig(v)).collect();
        buf.push_str(&line.join(","));
        buf.push('\n');
    }
    buf
}

/// Metrics for one loop trace. Step metrics only apply to a constant
/// setpoint that differs from the initial output.
pub fn loop_metrics(trace: &LoopTrace, cfg: &SimConfig) -> ResponseMetrics {
    let times = trace.times();
    let outputs = trace.outputs();
    let mcfg = &cfg.sim.metrics;
    let mut m = match trace.constant_setpoint() {
        Some(sp) => compute_step_metrics(&times, &outputs, sp, mcfg).unwrap_or_default(),
        None => ResponseMetrics::default(),
    };
    m.rms_tracking_error = compute_rms_error(&times, &trace.setpoints(), &outputs, mcfg.rms_warmup)
        .ok()
        .flatten();
    m
}

pub fn summarize(run: &RunSpec, traj: &Trajectory) -> Vec<SummaryRow> {
    traj.loops
        .iter()
        .map(|l| SummaryRow {
            run_id: run.id.clone(),
            controller: run.controller().to_string(),
            tau: run.tau(),
            seed: run.seed(),
            loop_name: l.name.to_string(),
            metrics: loop_metrics(l, &traj.config),
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig).unwrap_or_default()
}

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "run_id",
    "controller",
    "tau",
    "seed",
    "loop",
    "rise_time",
    "settling_time",
    "overshoot_pct",
    "steady_state_error",
    "rms_tracking_error",
    "status",
];

fn summary_header(spec: &ExperimentSpec) -> Vec<(String, String)> {
    let mut header = vec![
        ("version".to_string(), CODE_VERSION.to_string()),
        ("prng".to_string(), PRNG_ALGORITHM.to_string()),
    ];
    let mut value = serde_json::to_value(spec).expect("spec serializes");
    if let Value::Object(map) = &mut value {
        map.remove("output");
    }
    flatten_json("", &value, &mut header);
    header
}

fn summary_csv(spec: &ExperimentSpec, runs: &[RunOutcome]) -> String {
    let mut buf = String::new();
    write_header(&mut buf, &summary_header(spec));
    buf.push_str(&SUMMARY_COLUMNS.join(","));
    buf.push('\n');
    for run in runs {
        match &run.result {
            Ok(rows) => {
                for r in rows {
                    let m = &r.metrics;
                    let fields = [
                        r.run_id.clone(),
                        r.controller.clone(),
                        format_sig(r.tau),
                        r.seed.to_string(),
                        r.loop_name.clone(),
                        opt(m.rise_time),
                        opt(m.settling_time),
                        opt(m.overshoot_pct),
                        opt(m.steady_state_error),
                        opt(m.rms_tracking_error),
                        "ok".to_string(),
                    ];
                    buf.push_str(&fields.join(","));
                    buf.push('\n');
                }
            }
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                let fields = [
                    run.run.id.clone(),
                    run.run.controller().to_string(),
                    format_sig(run.run.tau()),
                    run.run.seed().to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("failed: {msg}"),
                ];
                buf.push_str(&fields.join(","));
                buf.push('\n');
            }
        }
    }
    buf
}

#[derive(Serialize)]
struct RunMeta<'a> {
    id: &'a str,
    controller: String,
    tau: f64,
    seed: u64,
    status: String,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    version: &'a str,
    prng: &'a str,
    spec: &'a ExperimentSpec,
    runs: Vec<RunMeta<'a>>,
}

fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(|source| IoError {
        path: path.to_path_buf(),
        source,
    })
}

fn execute(run: &RunSpec, out_dir: &Path) -> Result<RunOutcome, IoError> {
    let traj = match run_scenario(&run.config) {
        Ok(t) => t,
        Err(e) => {
            return Ok(RunOutcome {
                run: run.clone(),
                result: Err(e),
                files: Vec::new(),
            })
        }
    };
    let mut files = Vec::new();
    for l in &traj.loops {
        let path = out_dir.join(format!("{}_{}.csv", run.id, l.name));
        write_file(&path, &loop_csv(&run.id, &run.config, l))?;
        files.push(path);
    }
    Ok(RunOutcome {
        run: run.clone(),
        result: Ok(summarize(run, &traj)),
        files,
    })
}

/// Runs every enumerated run of `spec` (in parallel) and writes artifacts.
///
/// A run that fails in simulation is reported in the summary without stopping
/// the others. I/O failures abort the experiment.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<ExperimentOutcome, IoError> {
    fs::create_dir_all(out_dir).map_err(|source| IoError {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let runs = spec.runs();
    let outcomes = runs
        .par_iter()
        .map(|r| execute(r, out_dir))
        .collect::<Result<Vec<_>, _>>()?;

    let summary_path = match spec.output.report {
        ReportFormat::Csv => {
            let path = out_dir.join("summary.csv");
            write_file(&path, &summary_csv(spec, &outcomes))?;
            path
        }
        ReportFormat::Json => {
            let path = out_dir.join("summary.json");
            let rows: Vec<&SummaryRow> = outcomes
                .iter()
                .filter_map(|r| r.result.as_ref().ok())
                .flatten()
                .collect();
            let text = serde_json::to_string_pretty(&rows).expect("rows serialize");
            write_file(&path, &text)?;
            path
        }
    };

    let meta = Metadata {
        version: CODE_VERSION,
        prng: PRNG_ALGORITHM,
        spec,
        runs: outcomes
            .iter()
            .map(|o| RunMeta {
                id: &o.run.id,
                controller: o.run.controller().to_string(),
                tau: o.run.tau(),
                seed: o.run.seed(),
                status: match &o.result {
                    Ok(_) => "ok".to_string(),
                    Err(e) => format!("failed: {e}"),
                },
                files: o
                    .files
                    .iter()
                    .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
                    .collect(),
            })
            .collect(),
    };
    let metadata_path = out_dir.join("metadata.json");
    write_file(
        &metadata_path,
        &serde_json::to_string_pretty(&meta).expect("metadata serializes"),
    )?;

    Ok(ExperimentOutcome {
        runs: outcomes,
        summary_path,
        metadata_path,
    })
}
