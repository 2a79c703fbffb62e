use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::Location;
use crate::network::dijkstra;

/// Cluster membership for the servers of one scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    /// Cluster index per server, clusters numbered by their smallest member.
    pub cluster_of: Vec<usize>,
    /// Exactly one head per cluster.
    pub head: Vec<bool>,
}

impl ClusterAssignment {
    pub fn cluster_count(&self) -> usize {
        self.cluster_of.iter().max().map_or(0, |m| m + 1)
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.cluster_of.len()).filter(|&s| self.cluster_of[s] == cluster).collect()
    }

    pub fn head_of(&self, cluster: usize) -> usize {
        (0..self.cluster_of.len())
            .find(|&s| self.cluster_of[s] == cluster && self.head[s])
            .expect("every cluster has a head")
    }
}

pub(crate) fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Unweighted betweenness centrality (Brandes), counting each unordered
/// pair once.
pub fn betweenness(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let mut cb = vec![0.0; n];
    let mut sigma = vec![0f64; n];
    let mut dist = vec![-1i64; n];
    let mut delta = vec![0.0; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        let mut order = Vec::with_capacity(n);
        sigma.fill(0.0);
        dist.fill(-1);
        delta.fill(0.0);
        preds.iter_mut().for_each(Vec::clear);
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    cb.iter_mut().for_each(|c| *c /= 2.0);
    cb
}

/// Average-linkage agglomeration of `dist` (a symmetric matrix) down to `k`
/// clusters. Returns clusters as sorted member lists ordered by smallest
/// member. The closest pair merges first; ties go to the smallest pair of
/// cluster positions.
#[allow(clippy::needless_range_loop)]
pub fn average_linkage(dist: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let n = dist.len();
    assert!(k >= 1 && k <= n.max(1), "need 1 <= k <= n");
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut d: Vec<Vec<f64>> = dist.to_vec();
    while clusters.len() > k {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                if d[i][j] < best.0 {
                    best = (d[i][j], i, j);
                }
            }
        }
        let (_, i, j) = best;
        let (ni, nj) = (clusters[i].len() as f64, clusters[j].len() as f64);
        for m in 0..clusters.len() {
            if m != i && m != j {
                let v = (ni * d[i][m] + nj * d[j][m]) / (ni + nj);
                d[i][m] = v;
                d[m][i] = v;
            }
        }
        let moved = clusters.remove(j);
        clusters[i].extend(moved);
        clusters[i].sort_unstable();
        d.remove(j);
        for row in &mut d {
            row.remove(j);
        }
    }
    clusters
}

/// Groups the servers hosted at `hosts` (vertex ids) into `k` clusters.
///
/// Server distance is the shortest path over the MAN with each link weighted
/// by the Euclidean distance of its endpoints. Each cluster's head is the
/// member whose host vertex has the highest betweenness on the whole graph
/// (smallest server index on ties).
pub fn cluster_servers(
    locs: &[Location],
    edges: &[(usize, usize)],
    hosts: &[usize],
    k: usize,
) -> Result<ClusterAssignment> {
    if hosts.is_empty() || k < 1 || k > hosts.len() {
        return Err(Error::Param(format!(
            "cluster count {k} must be in [1, {}]",
            hosts.len()
        )));
    }
    let adj = adjacency(locs.len(), edges);
    let dist: Vec<Vec<f64>> = hosts
        .iter()
        .map(|&h| {
            let all = dijkstra(locs.len(), h, |u| adj[u].iter().map(move |&v| (v, locs[u].distance(&locs[v]))));
            hosts.iter().map(|&o| all[o]).collect::<Vec<f64>>()
        })
        .collect();
    if dist.iter().flatten().any(|d| !d.is_finite()) {
        return Err(Error::Graph("servers are not all connected".into()));
    }
    let clusters = average_linkage(&dist, k);
    let cb = betweenness(&adj);
    let mut cluster_of = vec![0; hosts.len()];
    let mut head = vec![false; hosts.len()];
    for (c, members) in clusters.iter().enumerate() {
        let mut best = members[0];
        for &s in members {
            cluster_of[s] = c;
            if cb[hosts[s]] > cb[hosts[best]] {
                best = s;
            }
        }
        head[best] = true;
    }
    Ok(ClusterAssignment { cluster_of, head })
}
