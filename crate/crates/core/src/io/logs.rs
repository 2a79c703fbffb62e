//! CSV schemas written by an episode and read back by `summarize`.
//!
//! Files in an episode directory:
//! - `tasks.csv`: one row per generated task ([`TaskRow`])
//! - `agents/<agent>.csv`: one row per completed pricing slot ([`AgentRow`])
//! - `nodes.csv`: energy and utilization per server and device ([`NodeRow`])
//! - `run.csv`: one row of run metadata ([`RunRow`])
//! - `summary.csv`: one [`super::summary::RunSummary`] row

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TASKS_CSV: &str = "tasks.csv";
pub const NODES_CSV: &str = "nodes.csv";
pub const RUN_CSV: &str = "run.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const AGENTS_DIR: &str = "agents";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub id: u64,
    pub device: usize,
    pub creation_time: f64,
    /// MIs.
    pub length: f64,
    pub input_bits: f64,
    pub output_bits: f64,
    pub container_bits: f64,
    pub deadline: f64,
    /// `local` or the executing server's name.
    pub destination: String,
    /// Pricing agent credited with the offload (empty when local).
    pub agent: String,
    /// Pricing slot in which the offloading decision was made.
    pub slot: Option<u64>,
    pub price: f64,
    pub status: String,
    pub rejected: bool,
    pub upload_start: Option<f64>,
    pub upload_end: Option<f64>,
    pub arrival: Option<f64>,
    pub exec_start: Option<f64>,
    pub exec_end: Option<f64>,
    pub download_start: Option<f64>,
    pub download_end: Option<f64>,
    pub delivered: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRow {
    pub slot: u64,
    /// Slot start, seconds.
    pub time: f64,
    /// Queue feature of the state (task count or cluster mean).
    pub queue: f64,
    /// Arrival-rate feature of the state, tasks per second.
    pub arrival_rate: f64,
    pub price: f64,
    /// MIs offloaded to the agent during the slot.
    pub offloaded_mi: f64,
    pub reward: f64,
    pub cumulative_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub name: String,
    /// `server` or `device`.
    pub kind: String,
    pub cores: u32,
    pub idle_power: f64,
    pub max_power: f64,
    /// Time covered by energy ticks, seconds.
    pub billed_seconds: f64,
    pub busy_core_seconds: f64,
    pub energy_j: f64,
    pub battery_remaining_j: Option<f64>,
    pub died_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub scenario: String,
    pub topology: String,
    pub mode: String,
    pub seed: u64,
    pub simulation_time_s: f64,
    pub slot_length_s: f64,
    pub devices: usize,
    pub servers: usize,
    pub agents: usize,
    pub tasks_generated: u64,
    pub events_fired: u64,
    pub price_updates_per_agent: u64,
    pub mobility_rounds: u64,
    pub network_rounds: u64,
    pub trace_hash: String,
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Like [`write_rows`] but writes the header even with no rows.
pub fn write_rows_with_header<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    if !rows.is_empty() {
        return write_rows(path, rows);
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

pub const TASK_HEADER: &[&str] = &[
    "id",
    "device",
    "creation_time",
    "length",
    "input_bits",
    "output_bits",
    "container_bits",
    "deadline",
    "destination",
    "agent",
    "slot",
    "price",
    "status",
    "rejected",
    "upload_start",
    "upload_end",
    "arrival",
    "exec_start",
    "exec_end",
    "download_start",
    "download_end",
    "delivered",
];

pub const AGENT_HEADER: &[&str] = &[
    "slot",
    "time",
    "queue",
    "arrival_rate",
    "price",
    "offloaded_mi",
    "reward",
    "cumulative_reward",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cells_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let row = TaskRow {
            id: 3,
            device: 1,
            creation_time: 0.1,
            length: 2000.5,
            input_bits: 8e5,
            output_bits: 4e5,
            container_bits: 8e5,
            deadline: 0.5,
            destination: "local".into(),
            agent: String::new(),
            slot: None,
            price: 0.0,
            status: "created".into(),
            rejected: false,
            upload_start: None,
            upload_end: None,
            arrival: None,
            exec_start: Some(0.1),
            exec_end: None,
            download_start: None,
            download_end: None,
            delivered: None,
        };
        write_rows(&p, std::slice::from_ref(&row)).unwrap();
        assert_eq!(read_rows::<TaskRow>(&p).unwrap(), vec![row]);
        let q = dir.path().join("empty.csv");
        write_rows_with_header::<TaskRow>(&q, TASK_HEADER, &[]).unwrap();
        assert!(read_rows::<TaskRow>(&q).unwrap().is_empty());
    }

    #[test]
    fn headers_match_fields() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let row = AgentRow {
            slot: 0,
            time: 0.0,
            queue: 0.0,
            arrival_rate: 0.0,
            price: 0.5,
            offloaded_mi: 0.0,
            reward: -1.0,
            cumulative_reward: -1.0,
        };
        write_rows(&p, &[row]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), AGENT_HEADER.join(","));
    }
}
