//! Per-run metrics read back from the episode logs, and cross-episode
//! aggregation with Student-t confidence intervals.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::TaskStatus;

use super::logs::{read_rows, write_rows, AgentRow, NodeRow, RunRow, TaskRow, AGENTS_DIR, NODES_CSV, RUN_CSV, SUMMARY_CSV, TASKS_CSV};

/// Relative tolerance of the energy reconstruction check.
const ENERGY_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub topology: String,
    pub mode: String,
    pub seed: u64,
    pub tasks_generated: u64,
    pub tasks_finished: u64,
    pub tasks_unfinished: u64,
    pub offloaded: u64,
    pub offloaded_pct: f64,
    pub success: u64,
    pub success_pct: Option<f64>,
    pub edge_success_pct: Option<f64>,
    pub local_success_pct: Option<f64>,
    pub failed_latency: u64,
    pub failed_energy: u64,
    pub failed_device_dead: u64,
    pub rejected: u64,
    /// Mean over delivered offloaded tasks of upload, download and propagation time.
    pub avg_network_time: Option<f64>,
    pub total_return: f64,
    pub server_energy_j: f64,
    pub device_energy_j: f64,
    pub total_energy_j: f64,
    /// Mean server CPU utilization over the billed time.
    pub cpu_utilization_pct: f64,
    pub dead_devices: u64,
}

/// Logs of one episode as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLogs {
    pub run: RunRow,
    pub tasks: Vec<TaskRow>,
    pub agents: Vec<(String, Vec<AgentRow>)>,
    pub nodes: Vec<NodeRow>,
}

pub fn read_logs(dir: &Path) -> Result<RunLogs> {
    let runs: Vec<RunRow> = read_rows(&dir.join(RUN_CSV))?;
    let [run] = <[RunRow; 1]>::try_from(runs).map_err(|v| {
        Error::Logs(format!("{}: expected one row, found {}", dir.join(RUN_CSV).display(), v.len()))
    })?;
    let mut agents = Vec::new();
    let agent_dir = dir.join(AGENTS_DIR);
    if agent_dir.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(&agent_dir)
            .map_err(|e| Error::io(&agent_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        for f in files {
            let id = f.file_stem().unwrap().to_string_lossy().into_owned();
            agents.push((id, read_rows(&f)?));
        }
    }
    Ok(RunLogs {
        run,
        tasks: read_rows(&dir.join(TASKS_CSV))?,
        agents,
        nodes: read_rows(&dir.join(NODES_CSV))?,
    })
}

fn pct(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 * 100.0 / den as f64)
}

fn status(t: &TaskRow) -> Result<TaskStatus> {
    TaskStatus::parse(&t.status).ok_or_else(|| Error::Logs(format!("task {}: unknown status '{}'", t.id, t.status)))
}

/// Computes the run metrics and checks the logs for internal consistency.
pub fn summarize_logs(logs: &RunLogs) -> Result<RunSummary> {
    let run = &logs.run;
    let mut finished = 0;
    let mut success = 0;
    let (mut offloaded, mut edge_finished, mut edge_success) = (0, 0, 0);
    let (mut local_finished, mut local_success) = (0, 0);
    let (mut failed_latency, mut failed_energy, mut failed_dead, mut rejected) = (0, 0, 0, 0);
    let mut network = (0.0, 0u64);
    let mut open = 0u64;
    for t in &logs.tasks {
        let s = status(t)?;
        let edge = t.destination != "local";
        offloaded += u64::from(edge);
        if !s.is_terminal() {
            open += 1;
            continue;
        }
        finished += 1;
        match s {
            TaskStatus::DoneSuccess => success += 1,
            TaskStatus::FailedLatency => failed_latency += 1,
            TaskStatus::FailedEnergy => failed_energy += 1,
            TaskStatus::FailedDeviceDead => failed_dead += 1,
            _ => unreachable!(),
        }
        rejected += u64::from(t.rejected);
        let ok = u64::from(s == TaskStatus::DoneSuccess);
        if edge {
            edge_finished += 1;
            edge_success += ok;
        } else {
            local_finished += 1;
            local_success += ok;
        }
        if let (true, Some(us), Some(ar), Some(ds), Some(dl)) =
            (edge, t.upload_start, t.arrival, t.download_start, t.delivered)
        {
            network.0 += (ar - us) + (dl - ds);
            network.1 += 1;
        }
    }
    let generated = run.tasks_generated;
    let accounted = success + failed_latency + failed_energy + failed_dead + open;
    if accounted != generated || edge_finished + local_finished != finished {
        return Err(Error::Logs(format!(
            "task conservation violated: {generated} generated, {accounted} accounted for \
             ({success} succeeded, {} failed, {open} unfinished)",
            failed_latency + failed_energy + failed_dead
        )));
    }
    let unfinished = open;

    let mut total_return = 0.0;
    for (id, rows) in &logs.agents {
        let mut cum = 0.0;
        for r in rows {
            cum += r.reward;
            if (cum - r.cumulative_reward).abs() > 1e-9 * cum.abs().max(1.0) {
                return Err(Error::Logs(format!("agent {id}: cumulative reward drifts at slot {}", r.slot)));
            }
        }
        total_return += rows.last().map_or(0.0, |r| r.cumulative_reward);
    }

    let (mut server_e, mut device_e) = (0.0, 0.0);
    let (mut busy, mut capacity) = (0.0, 0.0);
    let mut dead = 0;
    for n in &logs.nodes {
        if n.kind == "server" {
            let expect = n.idle_power * n.billed_seconds
                + (n.max_power - n.idle_power) * n.busy_core_seconds / f64::from(n.cores);
            if (expect - n.energy_j).abs() > ENERGY_RTOL * expect.abs().max(1.0) {
                return Err(Error::Logs(format!(
                    "{}: energy {} does not match utilization {}",
                    n.name, n.energy_j, expect
                )));
            }
            server_e += n.energy_j;
            busy += n.busy_core_seconds;
            capacity += f64::from(n.cores) * n.billed_seconds;
        } else {
            device_e += n.energy_j;
            dead += u64::from(n.died_at.is_some());
        }
    }

    Ok(RunSummary {
        scenario: run.scenario.clone(),
        topology: run.topology.clone(),
        mode: run.mode.clone(),
        seed: run.seed,
        tasks_generated: generated,
        tasks_finished: finished,
        tasks_unfinished: unfinished,
        offloaded,
        offloaded_pct: pct(offloaded, generated).unwrap_or(0.0),
        success,
        success_pct: pct(success, finished),
        edge_success_pct: pct(edge_success, edge_finished),
        local_success_pct: pct(local_success, local_finished),
        failed_latency,
        failed_energy,
        failed_device_dead: failed_dead,
        rejected,
        avg_network_time: (network.1 > 0).then(|| network.0 / network.1 as f64),
        total_return,
        server_energy_j: server_e,
        device_energy_j: device_e,
        total_energy_j: server_e + device_e,
        cpu_utilization_pct: if capacity > 0.0 { busy * 100.0 / capacity } else { 0.0 },
        dead_devices: dead,
    })
}

/// Reads an episode directory, writes its `summary.csv` and returns it.
pub fn summarize_dir(dir: &Path) -> Result<RunSummary> {
    let s = summarize_logs(&read_logs(dir)?)?;
    write_rows(&dir.join(SUMMARY_CSV), std::slice::from_ref(&s))?;
    Ok(s)
}

/// Episode directories (those holding a `run.csv`) below `root`, sorted.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.join(RUN_CSV).is_file() {
            out.push(dir);
            continue;
        }
        for e in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let p = e.map_err(|e| Error::io(&dir, e))?.path();
            if p.is_dir() {
                stack.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Mean and 95% confidence half-width of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub half_width: f64,
    /// A single sample: the interval is not defined and reported as zero.
    pub degenerate: bool,
}

pub fn aggregate(values: &[f64]) -> Aggregate {
    let n = values.len();
    assert!(n >= 1, "aggregate needs at least one value");
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Aggregate {
            n,
            mean,
            std: 0.0,
            half_width: 0.0,
            degenerate: true,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("dof >= 1")
        .inverse_cdf(0.975);
    Aggregate {
        n,
        mean,
        std,
        half_width: t * std / (n as f64).sqrt(),
        degenerate: false,
    }
}

/// One row of a campaign's `aggregate.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub group: String,
    pub scenario: String,
    pub topology: String,
    pub mode: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub ci95_half_width: f64,
    pub degenerate: bool,
}

type Metric = (&'static str, fn(&RunSummary) -> Option<f64>);

pub const METRICS: &[Metric] = &[
    ("total_return", |s| Some(s.total_return)),
    ("offloaded_pct", |s| Some(s.offloaded_pct)),
    ("success_pct", |s| s.success_pct),
    ("edge_success_pct", |s| s.edge_success_pct),
    ("local_success_pct", |s| s.local_success_pct),
    ("avg_network_time", |s| s.avg_network_time),
    ("total_energy_j", |s| Some(s.total_energy_j)),
    ("server_energy_j", |s| Some(s.server_energy_j)),
    ("device_energy_j", |s| Some(s.device_energy_j)),
    ("cpu_utilization_pct", |s| Some(s.cpu_utilization_pct)),
    ("tasks_generated", |s| Some(s.tasks_generated as f64)),
];

/// Aggregates `summaries` per metric; undefined values are skipped.
pub fn aggregate_rows(group: &str, summaries: &[RunSummary]) -> Vec<AggregateRow> {
    let Some(first) = summaries.first() else {
        return Vec::new();
    };
    METRICS
        .iter()
        .filter_map(|(name, get)| {
            let values: Vec<f64> = summaries.iter().filter_map(get).collect();
            (!values.is_empty()).then(|| {
                let a = aggregate(&values);
                AggregateRow {
                    group: group.to_owned(),
                    scenario: first.scenario.clone(),
                    topology: first.topology.clone(),
                    mode: first.mode.clone(),
                    metric: (*name).to_owned(),
                    n: a.n,
                    mean: a.mean,
                    std: a.std,
                    ci95_half_width: a.half_width,
                    degenerate: a.degenerate,
                }
            })
        })
        .collect()
}
