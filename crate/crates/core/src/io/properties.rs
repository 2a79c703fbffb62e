//! `simulation_parameters.properties`: `key=value` lines, `#`/`!` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::xml::{parse_bool, read_file};

pub const PROPERTIES_FILE: &str = "simulation_parameters.properties";

/// Control topology, the `orchestration_algorithms` value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Topology {
    Centralized,
    Hybrid,
    Decentralized,
}

impl Topology {
    pub const ALL: [Topology; 3] = [Topology::Centralized, Topology::Hybrid, Topology::Decentralized];

    pub fn token(self) -> &'static str {
        match self {
            Topology::Centralized => "CENTRALIZED",
            Topology::Hybrid => "HYBRID",
            Topology::Decentralized => "DECENTRALIZED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.token().eq_ignore_ascii_case(s.trim()))
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationParameters {
    /// Minutes.
    pub simulation_time: f64,
    /// Seconds between mobility/energy updates.
    pub update_interval: f64,
    pub enable_orchestrators: bool,
    /// Seconds between network reallocation rounds.
    pub network_update_interval: f64,
    /// Mbps.
    pub man_bandwidth: f64,
    pub man_latency: f64,
    /// Mbps.
    pub wifi_bandwidth: f64,
    pub wifi_latency: f64,
    pub orchestration_architectures: String,
    pub topology: Topology,
    pub device_count: usize,
    /// Side of the square simulation area in meters.
    pub area_side: f64,
}

impl Default for SimulationParameters {
    fn default() -> Self {
        Self {
            simulation_time: 60.0,
            update_interval: 1.0,
            enable_orchestrators: false,
            network_update_interval: 1.0,
            man_bandwidth: 1000.0,
            man_latency: 0.005,
            wifi_bandwidth: 1300.0,
            wifi_latency: 0.0025,
            orchestration_architectures: "EDGE_ONLY".into(),
            topology: Topology::Decentralized,
            device_count: 1000,
            area_side: 1100.0,
        }
    }
}

impl SimulationParameters {
    pub fn horizon_seconds(&self) -> f64 {
        self.simulation_time * 60.0
    }
}

const KEYS: [&str; 12] = [
    "simulation_time",
    "update_interval",
    "enable_orchestrators",
    "network_update_interval",
    "man_bandwidth",
    "man_latency",
    "wifi_bandwidth",
    "wifi_latency",
    "orchestration_architectures",
    "orchestration_algorithms",
    "edge_devices_count",
    "simulation_area_side",
];

fn err(key: &str, rule: impl Into<String>) -> Error {
    Error::config(PROPERTIES_FILE, key, rule)
}

pub fn parse_properties(path: &Path) -> Result<SimulationParameters> {
    parse_properties_str(&read_file(path)?)
}

pub fn parse_properties_str(text: &str) -> Result<SimulationParameters> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('!') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(&format!("line {}", n + 1), "expected key=value"))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            log::warn!("{PROPERTIES_FILE}: ignoring unknown key '{k}'");
            continue;
        }
        if map.insert(k.to_owned(), v.trim().to_owned()).is_some() {
            return Err(err(k, "key given twice"));
        }
    }
    let get = |k: &str| map.get(k).map(String::as_str).ok_or_else(|| err(k, "required key is missing"));
    let num = |k: &str| -> Result<f64> {
        let v = get(k)?;
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| err(k, format!("'{v}' is not a finite number")))
    };
    let positive = |k: &str| -> Result<f64> {
        let v = num(k)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(err(k, "must be > 0"))
        }
    };
    let non_negative = |k: &str| -> Result<f64> {
        let v = num(k)?;
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(err(k, "must be >= 0"))
        }
    };

    let enable = get("enable_orchestrators")?;
    let enable_orchestrators =
        parse_bool(enable).ok_or_else(|| err("enable_orchestrators", "must be true or false"))?;
    if enable_orchestrators {
        return Err(err("enable_orchestrators", "only false is supported"));
    }
    let arch = get("orchestration_architectures")?;
    if arch != "EDGE_ONLY" {
        return Err(err("orchestration_architectures", "only EDGE_ONLY is supported"));
    }
    let algo = get("orchestration_algorithms")?;
    if algo.contains(',') {
        return Err(err("orchestration_algorithms", "exactly one topology per run"));
    }
    let topology = Topology::parse(algo).ok_or_else(|| {
        err(
            "orchestration_algorithms",
            format!("unknown topology '{algo}' (CENTRALIZED, HYBRID or DECENTRALIZED)"),
        )
    })?;
    let count = get("edge_devices_count")?;
    let device_count = count
        .parse::<usize>()
        .map_err(|_| err("edge_devices_count", "must be a non-negative integer"))?;

    Ok(SimulationParameters {
        simulation_time: non_negative("simulation_time")?,
        update_interval: positive("update_interval")?,
        enable_orchestrators,
        network_update_interval: positive("network_update_interval")?,
        man_bandwidth: positive("man_bandwidth")?,
        man_latency: non_negative("man_latency")?,
        wifi_bandwidth: positive("wifi_bandwidth")?,
        wifi_latency: non_negative("wifi_latency")?,
        orchestration_architectures: arch.to_owned(),
        topology,
        device_count,
        area_side: positive("simulation_area_side")?,
    })
}

pub fn write_properties(p: &SimulationParameters) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# simulation time in minutes");
    let _ = writeln!(s, "simulation_time={}", p.simulation_time);
    let _ = writeln!(s, "update_interval={}", p.update_interval);
    let _ = writeln!(s, "enable_orchestrators={}", p.enable_orchestrators);
    let _ = writeln!(s, "network_update_interval={}", p.network_update_interval);
    let _ = writeln!(s, "man_bandwidth={}", p.man_bandwidth);
    let _ = writeln!(s, "man_latency={}", p.man_latency);
    let _ = writeln!(s, "wifi_bandwidth={}", p.wifi_bandwidth);
    let _ = writeln!(s, "wifi_latency={}", p.wifi_latency);
    let _ = writeln!(s, "orchestration_architectures={}", p.orchestration_architectures);
    let _ = writeln!(s, "orchestration_algorithms={}", p.topology);
    let _ = writeln!(s, "edge_devices_count={}", p.device_count);
    let _ = writeln!(s, "simulation_area_side={}", p.area_side);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let p = SimulationParameters {
            topology: Topology::Hybrid,
            simulation_time: 10.0,
            ..Default::default()
        };
        let text = write_properties(&p);
        assert_eq!(parse_properties_str(&text).unwrap(), p);
    }

    #[test]
    fn unknown_topology_is_named() {
        let text = write_properties(&SimulationParameters::default())
            .replace("DECENTRALIZED", "FUZZY_DECISION_TREE");
        let e = parse_properties_str(&text).unwrap_err().to_string();
        assert!(e.contains("orchestration_algorithms") && e.contains("FUZZY_DECISION_TREE"), "{e}");
    }

    #[test]
    fn orchestrators_must_be_disabled() {
        let text = write_properties(&SimulationParameters::default())
            .replace("enable_orchestrators=false", "enable_orchestrators=true");
        assert!(parse_properties_str(&text).is_err());
    }

    #[test]
    fn missing_key_is_reported() {
        let text = write_properties(&SimulationParameters::default()).replace("man_latency=0.005\n", "");
        let e = parse_properties_str(&text).unwrap_err().to_string();
        assert!(e.contains("man_latency"), "{e}");
    }
}
