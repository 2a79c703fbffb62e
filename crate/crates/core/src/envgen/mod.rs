//! Synthetic MAN topologies: access point lattice, spanning tree, extra
//! links, server placement, clustering and the datacenters file.

mod cluster;
mod hex;
mod links;
mod placement;
mod twst;

use std::path::Path;

pub use cluster::{average_linkage, betweenness, cluster_servers, ClusterAssignment};
pub use hex::place_aps;
pub use links::{add_links, LinkWeights};
pub use placement::place_servers;
pub use twst::build_twst;

use crate::error::{Error, Result};
use crate::io::xml::{write_datacenters, write_file, DatacenterEntry, DatacentersFile, LinkEntry};
use crate::model::{Location, ServerSpec};
use crate::seed::SeedManager;

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub side: f64,
    pub coverage: f64,
    pub twst_weight: f64,
    pub link_weights: LinkWeights,
    pub extra_edges: usize,
    pub server_count: usize,
    pub cluster_count: usize,
    pub seed: u64,
    pub server_spec: ServerSpec,
    pub man_bandwidth: f64,
    pub man_latency: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            side: 1100.0,
            coverage: 45.0,
            twst_weight: 0.5,
            link_weights: LinkWeights {
                distance: 1.0,
                preferential: 1.0,
                uniform: 1.0,
            },
            extra_edges: 0,
            server_count: 20,
            cluster_count: 8,
            seed: 0,
            server_spec: ServerSpec::HIGH_CAPACITY,
            man_bandwidth: 1000.0,
            man_latency: 0.005,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Param(m.to_owned()));
        if !(self.side > 0.0) || !(self.coverage > 0.0) {
            return bad("side and coverage must be > 0");
        }
        if !(0.0..=1.0).contains(&self.twst_weight) {
            return bad("twst weight must be in [0, 1]");
        }
        if self.server_count < 1 {
            return bad("at least one server is required");
        }
        if self.cluster_count < 1 || self.cluster_count > self.server_count {
            return bad("cluster count must be in [1, servers]");
        }
        if !(self.man_bandwidth > 0.0) || !(self.man_latency >= 0.0) {
            return bad("MAN bandwidth must be > 0 and latency >= 0");
        }
        self.server_spec.validate().map_err(Error::Param)
    }
}

/// A generated environment before serialisation.
#[derive(Debug, Clone)]
pub struct Environment {
    pub aps: Vec<Location>,
    pub edges: Vec<(usize, usize)>,
    /// Host access point per server.
    pub hosts: Vec<usize>,
    pub clusters: ClusterAssignment,
}

pub fn generate(p: &GenParams) -> Result<Environment> {
    p.validate()?;
    let aps = place_aps(p.side, p.coverage);
    if p.server_count > aps.len() {
        return Err(Error::Param(format!(
            "{} servers requested but only {} access points fit",
            p.server_count,
            aps.len()
        )));
    }
    let seeds = SeedManager::new(p.seed);
    let tree = build_twst(&aps, p.twst_weight);
    let edges = add_links(&aps, &tree, p.link_weights, p.extra_edges, &mut seeds.derive_stream("envgen-links", 0))?;
    let mut degree = vec![0; aps.len()];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let hosts = place_servers(&degree, p.server_count, &mut seeds.derive_stream("envgen-servers", 0));
    let clusters = cluster_servers(&aps, &edges, &hosts, p.cluster_count)?;
    Ok(Environment {
        aps,
        edges,
        hosts,
        clusters,
    })
}

/// Datacenters file contents: `ap{i}` vertices, `dc{j}` servers, MAN links,
/// and one zero-latency link joining each server to its host access point.
pub fn to_datacenters(env: &Environment, spec: &ServerSpec, man_bandwidth: f64, man_latency: f64) -> DatacentersFile {
    let mut out = DatacentersFile::default();
    for (i, &loc) in env.aps.iter().enumerate() {
        out.datacenters.push(DatacenterEntry {
            name: format!("ap{i}"),
            periphery: true,
            location: loc,
            spec: None,
            cluster: None,
            cluster_head: false,
        });
    }
    for (j, &h) in env.hosts.iter().enumerate() {
        out.datacenters.push(DatacenterEntry {
            name: format!("dc{j}"),
            periphery: true,
            location: env.aps[h],
            spec: Some(*spec),
            cluster: Some(env.clusters.cluster_of[j]),
            cluster_head: env.clusters.head[j],
        });
    }
    for &(a, b) in &env.edges {
        out.links.push(LinkEntry {
            from: format!("ap{a}"),
            to: format!("ap{b}"),
            latency: man_latency,
            bandwidth: man_bandwidth,
        });
    }
    for (j, &h) in env.hosts.iter().enumerate() {
        out.links.push(LinkEntry {
            from: format!("dc{j}"),
            to: format!("ap{h}"),
            latency: 0.0,
            bandwidth: man_bandwidth,
        });
    }
    out
}

/// Generates and writes `edge_datacenters.xml` to `path`.
pub fn emit_datacenters_file(p: &GenParams, path: &Path) -> Result<DatacentersFile> {
    let env = generate(p)?;
    let file = to_datacenters(&env, &p.server_spec, p.man_bandwidth, p.man_latency);
    write_file(path, &write_datacenters(&file))?;
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::xml::parse_datacenters;

    fn small() -> GenParams {
        GenParams {
            side: 400.0,
            server_count: 6,
            cluster_count: 3,
            extra_edges: 4,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn heads_per_cluster_and_names() {
        let p = GenParams {
            seed: 9,
            ..Default::default()
        };
        let env = generate(&p).unwrap();
        let file = to_datacenters(&env, &p.server_spec, 1000.0, 0.005);
        let heads = file.datacenters.iter().filter(|d| d.cluster_head).count();
        assert_eq!(heads, 8);
        assert_eq!(file.datacenters.iter().filter(|d| d.is_server()).count(), 20);
        assert_eq!(file.datacenters.iter().filter(|d| d.name.contains("ap")).count(), 247);
        for c in 0..8 {
            assert!(!env.clusters.members(c).is_empty());
        }
    }

    #[test]
    fn emit_parse_emit_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edge_datacenters.xml");
        let file = emit_datacenters_file(&small(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed = parse_datacenters(&path).unwrap();
        assert_eq!(parsed, file);
        assert_eq!(write_datacenters(&parsed), text);
    }

    #[test]
    fn same_seed_same_environment() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!((a.edges, a.hosts, a.clusters), (b.edges, b.hosts, b.clusters));
    }

    #[test]
    fn too_many_servers() {
        let p = GenParams {
            side: 50.0,
            server_count: 10,
            cluster_count: 1,
            ..Default::default()
        };
        assert!(generate(&p).is_err());
    }
}
