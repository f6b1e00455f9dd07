//! Command implementations behind the `relay-planner` binary.
//!
//! Exit-code contract: 0 success, 1 input or setup error, 2 the optimizer
//! finished but its trajectory violates the kinematic limits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use relay_core::dynamics::feasibility_audit;
use relay_core::objective::{exact_throughput, Throughput};
use relay_core::optimizer::{solve, SolveReport};
use relay_core::scenario::{load_scenario, read_trajectory, write_trajectory, PeerSource, PeerSpec};
use relay_core::{GainModel, Scenario};

pub const TRACE_HEADER: &str =
    "t,snr_uav,snr_bs,rate_uav,rate_bs,rate_end_to_end,roll1,pitch1,roll2,pitch2";

/// Environment variable capping worker threads (0 or unset = automatic).
pub const THREADS_ENV: &str = "RELAY_PLANNER_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] relay_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Whether a command's result meets the kinematic limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Infeasible,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Infeasible => 2,
        }
    }
}

/// Optimization model selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanModel {
    /// Attitude-aware surrogate gains.
    Aware,
    /// All gain factors set to 1.
    Agnostic,
}

impl PlanModel {
    pub fn gain_model(self) -> GainModel {
        match self {
            PlanModel::Aware => GainModel::Approx,
            PlanModel::Agnostic => GainModel::PatternAgnostic,
        }
    }
}

fn load(path: &Path) -> CliResult<Scenario> {
    if !path.exists() {
        return Err(CliError::Input(format!(
            "scenario file {} does not exist",
            path.display()
        )));
    }
    Ok(load_scenario(path)?)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Short description of the peer trajectory, carried in every report so the
/// use of a synthetic stand-in is explicit.
pub fn peer_description(scenario: &Scenario) -> String {
    match &scenario.peer_source {
        PeerSource::File { file } => format!(
            "file:{}",
            file.file_name().map_or_else(
                || file.display().to_string(),
                |n| n.to_string_lossy().into_owned()
            )
        ),
        PeerSource::Synthetic(spec) => {
            let kind = match spec {
                PeerSpec::Hover { .. } => "hover",
                PeerSpec::Line { .. } => "line",
                PeerSpec::Arc { .. } => "arc",
                PeerSpec::Lissajous { .. } => "lissajous",
            };
            format!("synthetic:{kind}")
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub model: PlanModel,
    pub peer_trajectory: String,
    #[serde(flatten)]
    pub solve: SolveReport,
}

/// Optimizes the relay and writes the trajectory CSV and the JSON report.
pub fn cmd_optimize(scenario_path: &Path, model: PlanModel, out: &Path, report: &Path) -> CliResult<Outcome> {
    let scenario = load(scenario_path)?;
    let result = solve(&scenario, model.gain_model(), &scenario.solver)?;
    write_outputs(&scenario, model, &result, out, report)?;
    Ok(if result.feasible {
        Outcome::Success
    } else {
        Outcome::Infeasible
    })
}

fn write_outputs(scenario: &Scenario, model: PlanModel, result: &SolveReport, out: &Path, report: &Path) -> CliResult<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write_trajectory(result.trajectory(), out)?;
    let body = OptimizeReport {
        model,
        peer_trajectory: peer_description(scenario),
        solve: result.clone(),
    };
    write_file(report, &to_json(&body))
}

/// One row of an evaluation trace. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub snr_uav: f64,
    pub snr_bs: f64,
    pub rate_uav: f64,
    pub rate_bs: f64,
    pub rate_end_to_end: f64,
    pub roll1: f64,
    pub pitch1: f64,
    pub roll2: f64,
    pub pitch2: f64,
}

pub fn trace_rows(eval: &Throughput) -> Vec<TraceRow> {
    eval.trace
        .iter()
        .zip(&eval.relay_attitudes)
        .zip(&eval.peer_attitudes)
        .map(|((s, a1), a2)| TraceRow {
            t: s.t,
            snr_uav: s.snr_uav,
            snr_bs: s.snr_bs,
            rate_uav: s.rate_uav,
            rate_bs: s.rate_bs,
            rate_end_to_end: s.rate_end_to_end,
            roll1: a1.roll,
            pitch1: a1.pitch,
            roll2: a2.roll,
            pitch2: a2.pitch,
        })
        .collect()
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t, r.snr_uav, r.snr_bs, r.rate_uav, r.rate_bs, r.rate_end_to_end, r.roll1, r.pitch1, r.roll2, r.pitch2
        )
        .unwrap();
    }
    out
}

pub fn parse_trace_csv(text: &str) -> CliResult<Vec<TraceRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == TRACE_HEADER => {}
        other => return Err(CliError::Input(format!("unexpected trace header {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let vals = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Input(format!("trace row {}: {e}", i + 1)))?;
            if vals.len() != 10 {
                return Err(CliError::Input(format!(
                    "trace row {}: expected 10 columns, found {}",
                    i + 1,
                    vals.len()
                )));
            }
            Ok(TraceRow {
                t: vals[0],
                snr_uav: vals[1],
                snr_bs: vals[2],
                rate_uav: vals[3],
                rate_bs: vals[4],
                rate_end_to_end: vals[5],
                roll1: vals[6],
                pitch1: vals[7],
                roll2: vals[8],
                pitch2: vals[9],
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateSummary {
    pub total_bits: f64,
    pub min_rate: f64,
    pub rows: usize,
    /// Number of bound violations found while replaying (evaluation proceeds
    /// regardless).
    pub violations: usize,
}

/// Replays `relay_traj` under the exact dipole model and writes the trace.
pub fn cmd_evaluate(scenario_path: &Path, relay_traj: &Path, out: &Path) -> CliResult<EvaluateSummary> {
    let scenario = load(scenario_path)?;
    let relay = read_trajectory(relay_traj)?;
    let audit = feasibility_audit(&relay, scenario.v_max, scenario.a_max, scenario.solver.intra_samples)?;
    if !audit.is_feasible() {
        eprintln!(
            "warning: {} violates the kinematic limits ({} samples, worst excess {:.3e}); evaluating anyway",
            relay_traj.display(),
            audit.violations.len(),
            audit.max_excess()
        );
    }
    let eval = exact_throughput(&relay, &scenario.peer, &scenario.link_setup())?;
    let rows = trace_rows(&eval);
    write_file(out, &trace_csv(&rows))?;
    Ok(EvaluateSummary {
        total_bits: eval.total_bits,
        min_rate: eval.min_rate,
        rows: rows.len(),
        violations: audit.violations.len(),
    })
}

/// Solve summary embedded in a comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub trajectory_file: String,
    pub final_cost: f64,
    pub max_constraint_violation: f64,
    pub feasible: bool,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareTraces {
    pub aware: Vec<TraceRow>,
    pub agnostic: Vec<TraceRow>,
}

/// Attitude-aware versus pattern-agnostic relay, both judged under the exact
/// dipole model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    /// "ok", "infeasible", or a description of what failed.
    pub status: String,
    pub peer_trajectory: String,
    pub total_bits_aware: Option<f64>,
    pub total_bits_agnostic: Option<f64>,
    pub min_rate_aware: Option<f64>,
    pub min_rate_agnostic: Option<f64>,
    pub improvement_total_pct: Option<f64>,
    pub improvement_min_rate_pct: Option<f64>,
    pub aware: Option<SolveSummary>,
    pub agnostic: Option<SolveSummary>,
    pub traces: CompareTraces,
}

pub fn improvement_pct(aware: f64, agnostic: f64) -> f64 {
    100.0 * (aware - agnostic) / agnostic
}

/// Worker count from [`THREADS_ENV`]; `None` means automatic.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Paths of the two trajectories written next to a comparison report.
pub fn compare_trajectory_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = out
        .file_stem()
        .map_or_else(|| "compare".to_string(), |s| s.to_string_lossy().into_owned());
    let dir = out.parent().unwrap_or(Path::new(""));
    (
        dir.join(format!("{stem}.aware.csv")),
        dir.join(format!("{stem}.agnostic.csv")),
    )
}

struct Arm {
    summary: SolveSummary,
    eval: Throughput,
}

fn run_arm(scenario: &Scenario, model: PlanModel, traj_path: &Path) -> CliResult<Arm> {
    let result = solve(scenario, model.gain_model(), &scenario.solver)?;
    write_trajectory(result.trajectory(), traj_path)?;
    let eval = exact_throughput(result.trajectory(), &scenario.peer, &scenario.link_setup())?;
    Ok(Arm {
        summary: SolveSummary {
            trajectory_file: traj_path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            final_cost: result.final_cost,
            max_constraint_violation: result.max_constraint_violation,
            feasible: result.feasible,
            iterations_used: result.iterations_used,
        },
        eval,
    })
}

/// Optimizes with both models, evaluates both under the exact dipole model
/// and writes the comparison report plus both trajectories.
pub fn cmd_compare(scenario_path: &Path, out: &Path) -> CliResult<(CompareReport, Outcome)> {
    let scenario = load(scenario_path)?;
    let (aware_path, agnostic_path) = compare_trajectory_paths(out);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }

    let (aware, agnostic) = if thread_cap() == Some(1) {
        (
            run_arm(&scenario, PlanModel::Aware, &aware_path),
            run_arm(&scenario, PlanModel::Agnostic, &agnostic_path),
        )
    } else {
        std::thread::scope(|s| {
            let h = s.spawn(|| run_arm(&scenario, PlanModel::Agnostic, &agnostic_path));
            let a = run_arm(&scenario, PlanModel::Aware, &aware_path);
            (a, h.join().expect("agnostic solve panicked"))
        })
    };

    let mut report = CompareReport {
        status: String::new(),
        peer_trajectory: peer_description(&scenario),
        total_bits_aware: None,
        total_bits_agnostic: None,
        min_rate_aware: None,
        min_rate_agnostic: None,
        improvement_total_pct: None,
        improvement_min_rate_pct: None,
        aware: None,
        agnostic: None,
        traces: CompareTraces::default(),
    };
    let mut failures = Vec::new();
    match &aware {
        Ok(arm) => {
            report.total_bits_aware = Some(arm.eval.total_bits);
            report.min_rate_aware = Some(arm.eval.min_rate);
            report.aware = Some(arm.summary.clone());
            report.traces.aware = trace_rows(&arm.eval);
        }
        Err(e) => failures.push(format!("aware solve failed: {e}")),
    }
    match &agnostic {
        Ok(arm) => {
            report.total_bits_agnostic = Some(arm.eval.total_bits);
            report.min_rate_agnostic = Some(arm.eval.min_rate);
            report.agnostic = Some(arm.summary.clone());
            report.traces.agnostic = trace_rows(&arm.eval);
        }
        Err(e) => failures.push(format!("agnostic solve failed: {e}")),
    }
    if let (Ok(a), Ok(b)) = (&aware, &agnostic) {
        report.improvement_total_pct = Some(improvement_pct(a.eval.total_bits, b.eval.total_bits));
        report.improvement_min_rate_pct = Some(improvement_pct(a.eval.min_rate, b.eval.min_rate));
    }
    let feasible = [&aware, &agnostic]
        .iter()
        .all(|r| r.as_ref().map_or(false, |a| a.summary.feasible));
    report.status = if !failures.is_empty() {
        failures.join("; ")
    } else if feasible {
        "ok".into()
    } else {
        "infeasible".into()
    };
    write_file(out, &to_json(&report))?;

    // Partial results are on disk; now surface the first failure.
    if let Err(e) = aware {
        return Err(e);
    }
    if let Err(e) = agnostic {
        return Err(e);
    }
    let outcome = if feasible {
        Outcome::Success
    } else {
        Outcome::Infeasible
    };
    Ok((report, outcome))
}

fn attitude_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("t,vehicle,roll_deg,pitch_deg\n");
    for r in rows {
        writeln!(out, "{},uav1,{},{}", r.t, r.roll1.to_degrees(), r.pitch1.to_degrees()).unwrap();
        writeln!(out, "{},uav2,{},{}", r.t, r.roll2.to_degrees(), r.pitch2.to_degrees()).unwrap();
    }
    out
}

fn rate_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("t,link,rate\n");
    for r in rows {
        writeln!(out, "{},uav2_to_uav1,{}", r.t, r.rate_uav).unwrap();
        writeln!(out, "{},uav1_to_bs,{}", r.t, r.rate_bs).unwrap();
        writeln!(out, "{},end_to_end,{}", r.t, r.rate_end_to_end).unwrap();
    }
    out
}

/// Writes tidy plotting tables from a trace CSV (2 files) or a comparison
/// report (4 files). Returns the written paths.
pub fn cmd_plot_data(input: &Path, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    let text = fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let mut tables: Vec<(String, String)> = Vec::new();
    if text.trim_start().starts_with('{') {
        let report: CompareReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
        for (name, rows) in [("aware", &report.traces.aware), ("agnostic", &report.traces.agnostic)] {
            tables.push((format!("attitude_{name}.csv"), attitude_csv(rows)));
            tables.push((format!("rates_{name}.csv"), rate_csv(rows)));
        }
    } else {
        let rows = parse_trace_csv(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
        tables.push(("attitude.csv".into(), attitude_csv(&rows)));
        tables.push(("rates.csv".into(), rate_csv(&rows)));
    }
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    tables
        .into_iter()
        .map(|(name, body)| {
            let path = out_dir.join(name);
            write_file(&path, &body)?;
            Ok(path)
        })
        .collect()
}
