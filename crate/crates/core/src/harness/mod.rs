//! Config-driven experiment runner behind the `fixlab` command line.
//!
//! Each command loads an [`ExperimentConfig`], runs it, writes a JSON report
//! (plus a CSV for `run` and `sweep`) and maps the outcome to an exit code:
//! 0 when every verdict passed, 1 when any failed, 2 for configuration errors
//! and 3 for runtime errors.

pub mod config;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{
    check_condition_b, check_condition_c, check_condition_c_lambda, check_lemma3, check_nonexpansive,
    check_prop1, check_quasi_nonexpansive, sweep_condition_b, SweepCell, Verdict,
};
use crate::error::{Error, Result};
use crate::iterate::{
    fmt_real, goebel_kirk_gap, krasnoselskii_run, monotone_distance_check, multi_map_run,
    residual_vanishes_check, truncated_family_run, Trace, TraceSummary, MIN_RESIDUAL_RECORDS,
};
use crate::mappings::{check_pairwise_commuting, Mapping};
use crate::schedules::{verify_schedule, ScheduleReport};
use crate::vecspace::Vector;

pub use config::{
    CheckSpec, Engine, ExperimentConfig, MappingDescriptor, OutputSpec, Pairing, Resolved, RunSpec,
    SweepSpec,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Column order of the sweep table.
pub const SWEEP_CSV_HEADER: [&str; 7] = ["gamma", "mu", "verdict", "witness_x", "witness_y", "lhs", "rhs"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Check,
    Run,
    Schedule,
    Sweep,
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

/// A verdict on one configured mapping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub mapping: String,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Command,
    pub config: ExperimentConfig,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commuting: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepCell>>,
    /// Files written next to the report.
    #[serde(default)]
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

/// What a command produced: the exit code plus the report when one was made.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Option<RunReport>,
    pub report_path: Option<PathBuf>,
    pub error: Option<Error>,
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Runtime { .. } | Error::NonFinite { .. } | Error::Internal(_) | Error::Io(_) => EXIT_RUNTIME,
        _ => EXIT_CONFIG,
    }
}

fn needs<T: Clone>(value: &Option<T>, field: &str) -> Result<T> {
    value.clone().ok_or_else(|| Error::Config(format!("field `{field}`: required by this command")))
}

fn empty_report(command: Command, config: &ExperimentConfig) -> RunReport {
    RunReport {
        command,
        config: config.clone(),
        passed: true,
        checks: vec![],
        commuting: None,
        schedule: None,
        trace: None,
        diagnostics: vec![],
        sweep: None,
        outputs: vec![],
        duration_seconds: 0.0,
    }
}

fn run_check(spec: &CheckSpec, cfg: &ExperimentConfig, m: &Mapping) -> Result<Verdict> {
    let plan = cfg.plan_or_default();
    match spec {
        CheckSpec::Nonexpansive => check_nonexpansive(m, &plan),
        CheckSpec::QuasiNonexpansive => check_quasi_nonexpansive(m, &plan),
        CheckSpec::ConditionC => check_condition_c(m, &plan),
        CheckSpec::ConditionCLambda { lambda } => check_condition_c_lambda(m, *lambda, &plan),
        CheckSpec::ConditionB { gamma, mu } => check_condition_b(m, cfg.gamma_mu(*gamma, *mu)?, &plan),
        CheckSpec::FixedPointDistance { gamma, mu } => check_lemma3(m, cfg.gamma_mu(*gamma, *mu)?, &plan),
        CheckSpec::Prop1 { theta, gamma, mu } => check_prop1(m, *theta, cfg.gamma_mu(*gamma, *mu)?, &plan),
        CheckSpec::Commuting => Err(Error::Internal("commuting is family-wide".into())),
    }
}

/// Runs every configured check on every mapping. Checks run in parallel; the
/// report keeps configuration order.
pub fn execute_check(resolved: &Resolved) -> Result<RunReport> {
    let cfg = &resolved.config;
    if cfg.checks.is_empty() {
        return Err(Error::Config("field `checks`: at least one check is required".into()));
    }
    resolved.mapping(None)?;
    let per_mapping: Vec<(&CheckSpec, &Mapping)> = cfg
        .checks
        .iter()
        .filter(|c| **c != CheckSpec::Commuting)
        .flat_map(|c| resolved.mappings.iter().map(move |m| (c, m)))
        .collect();
    let verdicts = per_mapping
        .par_iter()
        .map(|(c, m)| run_check(c, cfg, m))
        .collect::<Result<Vec<_>>>()?;
    let mut report = empty_report(Command::Check, cfg);
    report.checks = per_mapping
        .iter()
        .zip(verdicts)
        .map(|((_, m), verdict)| CheckEntry { mapping: m.label().to_string(), verdict })
        .collect();
    if cfg.checks.contains(&CheckSpec::Commuting) {
        let ordered: Vec<Mapping> = resolved.order.iter().map(|&i| resolved.mappings[i].clone()).collect();
        report.commuting = Some(check_pairwise_commuting(&ordered, &cfg.plan_or_default())?);
    }
    report.passed = report.checks.iter().all(|e| e.verdict.passed)
        && report.commuting.as_ref().is_none_or(|v| v.passed);
    Ok(report)
}

/// Runs the configured engine and the trace diagnostics.
pub fn execute_run(resolved: &Resolved) -> Result<(RunReport, Trace)> {
    let cfg = &resolved.config;
    let run = needs(&cfg.run, "run")?;
    let iteration = needs(&cfg.iteration, "iteration")?;
    let first = resolved
        .order
        .first()
        .map(|&i| &resolved.mappings[i])
        .ok_or_else(|| Error::Config("field `mappings`: no mapping configured".into()))?;
    let x0 = Vector::new(run.x0.clone()).map_err(|e| Error::Config(format!("run.x0: {e}")))?;
    if x0.dim() != first.domain().dim() || !first.domain().contains(&x0) {
        return Err(Error::Config(format!("run.x0: {:?} lies outside the domain", run.x0)));
    }
    let mut report = empty_report(Command::Run, cfg);
    let trace = match run.engine {
        // a single map need not be a self-map; escapes surface as runtime errors
        Engine::Krasnoselskii => krasnoselskii_run(first, &x0, &iteration)?,
        Engine::MultiMap | Engine::TruncatedFamily => {
            let family = resolved.family()?;
            let schedule = needs(&cfg.schedule, "schedule")?;
            report.commuting = Some(check_pairwise_commuting(family.members(), &cfg.plan_or_default())?);
            if run.engine == Engine::MultiMap {
                multi_map_run(&family, &schedule, &x0, &iteration)?
            } else {
                truncated_family_run(&family, &schedule, &x0, &iteration)?
            }
        }
    };

    report.diagnostics = trace_diagnostics(&trace)?;
    report.trace = Some(trace.summary());
    report.passed =
        report.diagnostics.iter().all(|v| v.passed) && report.commuting.as_ref().is_none_or(|v| v.passed);
    Ok((report, trace))
}

/// Goebel–Kirk gap decay, monotone distance to each known common fixed point,
/// and residual decay when the trace is long enough.
pub fn trace_diagnostics(trace: &Trace) -> Result<Vec<Verdict>> {
    let mut out = Vec::new();
    if let Ok(gap) = goebel_kirk_gap(trace) {
        out.push(Verdict {
            condition_label: "gap_vanishes".into(),
            passed: gap.tail_max <= gap.head_max,
            checked_pairs: gap.gaps.len(),
            witness: None,
            plan: None,
            tolerance: 0.0,
            parameters: [("head_max".to_string(), gap.head_max), ("tail_max".to_string(), gap.tail_max)]
                .into_iter()
                .collect(),
            max_excess: None,
        });
    }
    for z in &trace.fixed_points {
        out.push(monotone_distance_check(trace, z)?);
    }
    if trace.records.len() >= MIN_RESIDUAL_RECORDS {
        out.push(residual_vanishes_check(trace)?);
    }
    Ok(out)
}

pub fn execute_schedule(resolved: &Resolved) -> Result<RunReport> {
    let cfg = &resolved.config;
    let schedule = needs(&cfg.schedule, "schedule")?;
    let horizon = needs(&cfg.horizon, "horizon")?;
    let r = verify_schedule(&schedule, horizon).map_err(|e| Error::Config(format!("horizon: {e}")))?;
    let mut report = empty_report(Command::Schedule, cfg);
    report.passed = r.compliant;
    report.schedule = Some(r);
    Ok(report)
}

pub fn execute_sweep(resolved: &Resolved) -> Result<RunReport> {
    let cfg = &resolved.config;
    let sweep = needs(&cfg.sweep, "sweep")?;
    let m = resolved.mapping(sweep.mapping.as_deref())?;
    let table = sweep_condition_b(m, &sweep.cells()?, &cfg.plan_or_default())?;
    let mut report = empty_report(Command::Sweep, cfg);
    report.passed = table.iter().all(|c| c.verdict_str() != "fail");
    report.sweep = Some(table);
    Ok(report)
}

fn join_coords(v: &Vector) -> String {
    v.coords().iter().map(|c| fmt_real(*c)).collect::<Vec<_>>().join(";")
}

/// The sweep table as CSV. Coordinates of multi-dimensional witnesses are
/// joined with `;`; pass and skipped cells leave the witness columns empty.
pub fn sweep_csv(cells: &[SweepCell]) -> Result<String> {
    use crate::conditions::CellOutcome;
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_CSV_HEADER).map_err(io)?;
    for c in cells {
        let mut row = vec![fmt_real(c.gamma), fmt_real(c.mu), c.verdict_str().to_string()];
        match &c.outcome {
            CellOutcome::Fail { witness } => row.extend([
                join_coords(&witness.x),
                witness.y.as_ref().map(join_coords).unwrap_or_default(),
                fmt_real(witness.lhs),
                fmt_real(witness.rhs),
            ]),
            _ => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

fn out_dir(cfg: &ExperimentConfig, opts: &Options) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write_file(dir: &Path, name: String, contents: &str, report: &mut RunReport) -> Result<()> {
    let path = dir.join(&name);
    std::fs::write(&path, contents)?;
    report.outputs.push(name);
    Ok(())
}

/// Loads, resolves and executes `command` on the config at `path`.
pub fn execute(command: Command, path: &Path, opts: &Options) -> Outcome {
    let started = Instant::now();
    let result = (|| -> Result<(RunReport, PathBuf)> {
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(seed) = opts.seed {
            cfg.override_seed(seed);
        }
        let resolved = Resolved::new(cfg)?;
        let dir = out_dir(&resolved.config, opts);
        let stem = resolved.config.stem();
        let mut extra: Vec<(String, String)> = Vec::new();
        let mut report = match command {
            Command::Check => execute_check(&resolved)?,
            Command::Schedule => execute_schedule(&resolved)?,
            Command::Run => {
                let (report, trace) = execute_run(&resolved)?;
                extra.push((format!("{stem}_trace.csv"), trace.to_csv()?));
                report
            }
            Command::Sweep => {
                let report = execute_sweep(&resolved)?;
                extra.push((format!("{stem}_sweep.csv"), sweep_csv(report.sweep.as_deref().unwrap_or(&[]))?));
                report
            }
        };
        std::fs::create_dir_all(&dir)?;
        for (name, contents) in extra {
            write_file(&dir, name, &contents, &mut report)?;
        }
        report.duration_seconds = started.elapsed().as_secs_f64();
        let report_path = dir.join(format!("{stem}_report.json"));
        let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(&report_path, json)?;
        Ok((report, report_path))
    })();
    match result {
        Ok((report, report_path)) => Outcome {
            exit_code: if report.passed { EXIT_PASS } else { EXIT_FAIL },
            report: Some(report),
            report_path: Some(report_path),
            error: None,
        },
        Err(e) => Outcome { exit_code: exit_code_for(&e), report: None, report_path: None, error: Some(e) },
    }
}

pub fn cmd_check(path: &Path, opts: &Options) -> Outcome {
    execute(Command::Check, path, opts)
}

pub fn cmd_run(path: &Path, opts: &Options) -> Outcome {
    execute(Command::Run, path, opts)
}

pub fn cmd_schedule(path: &Path, opts: &Options) -> Outcome {
    execute(Command::Schedule, path, opts)
}

pub fn cmd_sweep(path: &Path, opts: &Options) -> Outcome {
    execute(Command::Sweep, path, opts)
}
