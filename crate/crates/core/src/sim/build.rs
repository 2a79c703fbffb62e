//! Static scenario layout: MAN graph, servers, clusters and agent domains.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::io::config::Inputs;
use crate::io::properties::Topology;
use crate::io::xml::DATACENTERS_FILE;
use crate::model::{Location, ServerSpec};
use crate::network::{Link, ManGraph, Network, VertexId, VertexKind, Vertex, AccessLink};

#[derive(Debug, Clone)]
pub struct ServerInfo {
    pub name: String,
    pub vertex: VertexId,
    pub spec: ServerSpec,
    pub cluster: Option<usize>,
}

/// One pricing agent and the servers it prices for.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDomain {
    pub id: String,
    /// Server indices, ascending.
    pub members: Vec<usize>,
    /// Server that receives the uploads for this agent, if uploads are
    /// addressed to the agent rather than to a chosen server.
    pub entry: Option<usize>,
    /// Spec shared by every member.
    pub spec: ServerSpec,
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub topology: Topology,
    pub servers: Vec<ServerInfo>,
    pub agents: Vec<AgentDomain>,
    /// Access-point vertices, ascending.
    pub access_points: Vec<VertexId>,
    pub network: Network,
}

fn graph_err(rule: impl Into<String>) -> Error {
    Error::config(DATACENTERS_FILE, "network_links", rule)
}

fn shared_spec(servers: &[ServerInfo], members: &[usize], what: &str) -> Result<ServerSpec> {
    let spec = servers[members[0]].spec;
    if members.iter().any(|&j| servers[j].spec != spec) {
        return Err(Error::config(
            DATACENTERS_FILE,
            what,
            "servers priced by one agent must share one specification",
        ));
    }
    Ok(spec)
}

impl Layout {
    pub fn build(inputs: &Inputs) -> Result<Self> {
        let p = &inputs.params;
        let file = &inputs.datacenters;
        let mut vertices = Vec::with_capacity(file.datacenters.len());
        let mut index = HashMap::new();
        let mut servers = Vec::new();
        for (v, dc) in file.datacenters.iter().enumerate() {
            index.insert(dc.name.as_str(), v);
            let kind = if dc.is_server() {
                let spec = dc.spec.ok_or_else(|| {
                    Error::config(DATACENTERS_FILE, dc.name.as_str(), "edge server without a specification")
                })?;
                servers.push(ServerInfo {
                    name: dc.name.clone(),
                    vertex: v,
                    spec,
                    cluster: dc.cluster,
                });
                VertexKind::Server
            } else {
                VertexKind::AccessPoint
            };
            vertices.push(Vertex {
                name: dc.name.clone(),
                kind,
                location: dc.location,
            });
        }
        if servers.is_empty() {
            return Err(Error::config(DATACENTERS_FILE, "datacenter", "no edge server (name containing 'dc')"));
        }
        let links = file
            .links
            .iter()
            .map(|l| Link {
                a: index[l.from.as_str()],
                b: index[l.to.as_str()],
                bandwidth: l.bandwidth,
                latency: l.latency,
            })
            .collect();
        let graph = ManGraph::new(vertices, links)?;
        let access_points: Vec<VertexId> = graph.access_points().collect();
        if access_points.is_empty() {
            return Err(Error::config(DATACENTERS_FILE, "datacenter", "no access point (name containing 'ap')"));
        }
        let mut network = Network::new(
            graph,
            AccessLink {
                bandwidth: p.wifi_bandwidth,
                latency: p.wifi_latency,
            },
        );
        for s in &servers {
            let d = network.distances_to(s.vertex);
            if let Some(&ap) = access_points.iter().find(|&&ap| !d[ap].is_finite()) {
                return Err(graph_err(format!(
                    "server {} is unreachable from {}",
                    s.name,
                    network.graph().vertex(ap).name
                )));
            }
        }

        let agents = match p.topology {
            Topology::Decentralized => servers
                .iter()
                .enumerate()
                .map(|(j, s)| AgentDomain {
                    id: s.name.clone(),
                    members: vec![j],
                    entry: None,
                    spec: s.spec,
                })
                .collect(),
            Topology::Centralized => {
                let members: Vec<usize> = (0..servers.len()).collect();
                vec![AgentDomain {
                    id: "central".into(),
                    spec: shared_spec(&servers, &members, "datacenter")?,
                    members,
                    entry: None,
                }]
            }
            Topology::Hybrid => hybrid_domains(&servers, file)?,
        };
        Ok(Self {
            topology: p.topology,
            servers,
            agents,
            access_points,
            network,
        })
    }

    /// Access point nearest to `at`; lowest vertex id on ties.
    pub fn nearest_ap(&self, at: Location) -> VertexId {
        let g = self.network.graph();
        let mut best = (f64::INFINITY, usize::MAX);
        for &ap in &self.access_points {
            let d = g.vertex(ap).location.distance(&at);
            if d < best.0 {
                best = (d, ap);
            }
        }
        best.1
    }
}

fn hybrid_domains(servers: &[ServerInfo], file: &crate::io::xml::DatacentersFile) -> Result<Vec<AgentDomain>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (j, s) in servers.iter().enumerate() {
        let c = s
            .cluster
            .ok_or_else(|| Error::config(DATACENTERS_FILE, s.name.as_str(), "hybrid topology needs a cluster id"))?;
        if c >= clusters.len() {
            clusters.resize(c + 1, Vec::new());
        }
        clusters[c].push(j);
    }
    if let Some(c) = clusters.iter().position(Vec::is_empty) {
        return Err(Error::config(DATACENTERS_FILE, "cluster", format!("cluster ids must be contiguous; {c} is empty")));
    }
    let head_flag: HashMap<&str, bool> = file
        .datacenters
        .iter()
        .map(|d| (d.name.as_str(), d.cluster_head))
        .collect();
    clusters
        .into_iter()
        .enumerate()
        .map(|(c, members)| {
            let heads: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&j| head_flag[servers[j].name.as_str()])
                .collect();
            let [head] = heads[..] else {
                return Err(Error::config(
                    DATACENTERS_FILE,
                    "isClusterHead",
                    format!("cluster {c} needs exactly one head, found {}", heads.len()),
                ));
            };
            Ok(AgentDomain {
                id: servers[head].name.clone(),
                spec: shared_spec(servers, &members, "cluster")?,
                members,
                entry: Some(head),
            })
        })
        .collect()
}

/// Largest-remainder split of `n` items over percentage `shares`; ties in
/// the remainder go to the lower index.
pub fn apportion(n: usize, shares: &[f64]) -> Vec<usize> {
    let total: f64 = shares.iter().sum();
    if total <= 0.0 {
        return vec![0; shares.len()];
    }
    let exact: Vec<f64> = shares.iter().map(|s| s / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_sums_to_n() {
        assert_eq!(apportion(1000, &[30.0, 40.0, 20.0, 10.0]), vec![300, 400, 200, 100]);
        assert_eq!(apportion(50, &[30.0, 40.0, 20.0, 10.0]), vec![15, 20, 10, 5]);
        assert_eq!(apportion(7, &[30.0, 40.0, 20.0, 10.0]), vec![2, 3, 1, 1]);
        assert_eq!(apportion(1, &[50.0, 50.0]), vec![1, 0]);
        assert_eq!(apportion(0, &[100.0]), vec![0]);
    }
}
