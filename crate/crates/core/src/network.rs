//! Metro-area network: graph, latency routing and fair-share transfers.
//!
//! Transfers progress as a fluid: between recomputation points every
//! transfer moves at `min` over its links of `bandwidth / active transfers`.
//! Rates are recomputed whenever a transfer starts, finishes or is
//! rerouted, and at every periodic network tick, so each link is never
//! oversubscribed.

use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Location;

pub type VertexId = usize;
pub type LinkId = usize;
pub type TransferId = u64;

const MBPS: f64 = 1e6;
/// Remaining bits below this count as delivered.
const BIT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexKind {
    AccessPoint,
    Server,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub name: String,
    pub kind: VertexKind,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: VertexId,
    pub b: VertexId,
    /// Mbps
    pub bandwidth: f64,
    /// seconds
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManGraph {
    vertices: Vec<Vertex>,
    links: Vec<Link>,
    /// Neighbours sorted by vertex id.
    adjacency: Vec<Vec<(VertexId, LinkId)>>,
}

/// A latency-shortest path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Route {
    pub vertices: Vec<VertexId>,
    pub links: Vec<LinkId>,
    pub propagation: f64,
}

impl ManGraph {
    pub fn new(vertices: Vec<Vertex>, links: Vec<Link>) -> Result<Self> {
        let n = vertices.len();
        let mut adjacency = vec![Vec::new(); n];
        for (id, l) in links.iter().enumerate() {
            if l.a >= n || l.b >= n {
                return Err(Error::Graph(format!("link {id} references unknown vertex")));
            }
            if l.a == l.b {
                return Err(Error::Graph(format!("link {id} is a self-loop")));
            }
            if !(l.bandwidth > 0.0) || !(l.latency >= 0.0) {
                return Err(Error::Graph(format!(
                    "link {} - {} needs bandwidth > 0 and latency >= 0",
                    vertices[l.a].name, vertices[l.b].name
                )));
            }
            adjacency[l.a].push((l.b, id));
            adjacency[l.b].push((l.a, id));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        let g = Self {
            vertices,
            links,
            adjacency,
        };
        if !g.is_connected() {
            return Err(Error::Graph("network is not connected".into()));
        }
        Ok(g)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, LinkId)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adjacency[v].len()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn access_points(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.len()).filter(|&v| self.vertices[v].kind == VertexKind::AccessPoint)
    }

    pub fn servers(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.len()).filter(|&v| self.vertices[v].kind == VertexKind::Server)
    }

    fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Single-source latency distances.
    pub fn latency_from(&self, src: VertexId) -> Vec<f64> {
        self.shortest_tree(src).0
    }

    /// Latency distances and hop counts from `src`. Among paths whose
    /// latency ties (up to rounding) the one with fewer hops wins.
    pub fn shortest_tree(&self, src: VertexId) -> (Vec<f64>, Vec<u32>) {
        let n = self.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut hops = vec![u32::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        hops[src] = 0;
        heap.push(TreeItem(0.0, 0, src));
        while let Some(TreeItem(d, h, u)) = heap.pop() {
            if d != dist[u] || h != hops[u] {
                continue;
            }
            for &(v, l) in &self.adjacency[u] {
                let nd = d + self.links[l].latency;
                let nh = h + 1;
                let better = if tight(nd, dist[v]) {
                    nh < hops[v]
                } else {
                    nd < dist[v]
                };
                if better {
                    dist[v] = nd;
                    hops[v] = nh;
                    heap.push(TreeItem(nd, nh, v));
                }
            }
        }
        (dist, hops)
    }

    /// Latency-shortest path. Ties go to fewer hops, then to the
    /// lexicographically smallest vertex sequence.
    pub fn route(&self, src: VertexId, dst: VertexId) -> Result<Route> {
        let tree = self.shortest_tree(dst);
        self.route_with(src, dst, &tree)
    }

    /// Like [`route`](Self::route) with the precomputed tree rooted at `dst`.
    pub fn route_with(
        &self,
        src: VertexId,
        dst: VertexId,
        (to_dst, hops): &(Vec<f64>, Vec<u32>),
    ) -> Result<Route> {
        if src >= self.len() || dst >= self.len() {
            return Err(Error::Graph(format!("unknown endpoint {src} or {dst}")));
        }
        if !to_dst[src].is_finite() {
            return Err(Error::Graph(format!(
                "{} and {} are disconnected",
                self.vertices[src].name, self.vertices[dst].name
            )));
        }
        let mut route = Route {
            vertices: vec![src],
            ..Route::default()
        };
        let mut u = src;
        while u != dst {
            // neighbours are sorted, so the first tight edge has the smallest id
            let &(v, l) = self.adjacency[u]
                .iter()
                .find(|&&(v, l)| {
                    hops[v].wrapping_add(1) == hops[u]
                        && tight(self.links[l].latency + to_dst[v], to_dst[u])
                })
                .expect("shortest-path tree has a parent edge");
            route.links.push(l);
            route.vertices.push(v);
            route.propagation += self.links[l].latency;
            u = v;
        }
        Ok(route)
    }
}

#[inline]
fn tight(a: f64, b: f64) -> bool {
    a == b || (a.is_finite() && b.is_finite() && (a - b).abs() <= 1e-12 * a.abs().max(b.abs()))
}

#[derive(Copy, Clone, PartialEq)]
struct TreeItem(f64, u32, usize);

impl Eq for TreeItem {}

impl Ord for TreeItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
            .then_with(|| other.2.cmp(&self.2))
    }
}

impl PartialOrd for TreeItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over an implicit graph with non-negative weights.
pub fn dijkstra<F, I>(n: usize, src: usize, mut neighbors: F) -> Vec<f64>
where
    F: FnMut(usize) -> I,
    I: Iterator<Item = (usize, f64)>,
{
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(TreeItem(0.0, 0, src));
    while let Some(TreeItem(d, _, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for (v, w) in neighbors(u) {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(TreeItem(nd, 0, v));
            }
        }
    }
    dist
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    UploadInput,
    DownloadResult,
    Reroute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    pub id: TransferId,
    pub task: u64,
    pub direction: Direction,
    /// Device the transfer serves, if any.
    pub device: Option<usize>,
    /// MAN vertex at the server end.
    pub server_vertex: VertexId,
    pub path: Vec<LinkId>,
    pub total_bits: f64,
    pub remaining: f64,
    /// bits/s under the current allocation
    pub rate: f64,
    pub started: f64,
    pub propagation: f64,
    pub generation: u64,
}

/// A transfer whose prediction changed; the caller should (re)schedule its
/// completion at `done_at` tagged with `generation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub transfer: TransferId,
    pub generation: u64,
    pub done_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completed {
    pub transfer: Transfer,
    /// Instant the last bit left the sender.
    pub finished_at: f64,
}

/// Parameters of the per-AP wireless access link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessLink {
    pub bandwidth: f64,
    pub latency: f64,
}

#[derive(Debug, Clone)]
pub struct Network {
    graph: ManGraph,
    /// MAN links followed by one access link per vertex.
    links: Vec<Link>,
    access: AccessLink,
    load: Vec<u32>,
    transfers: BTreeMap<TransferId, Transfer>,
    next_id: TransferId,
    last_advance: f64,
    to_vertex: HashMap<VertexId, (Vec<f64>, Vec<u32>)>,
}

impl Network {
    pub fn new(graph: ManGraph, access: AccessLink) -> Self {
        let mut links = graph.links.clone();
        for v in 0..graph.len() {
            links.push(Link {
                a: v,
                b: v,
                bandwidth: access.bandwidth,
                latency: access.latency,
            });
        }
        let load = vec![0; links.len()];
        Self {
            graph,
            links,
            access,
            load,
            transfers: BTreeMap::new(),
            next_id: 0,
            last_advance: 0.0,
            to_vertex: HashMap::new(),
        }
    }

    pub fn graph(&self) -> &ManGraph {
        &self.graph
    }

    pub fn access(&self) -> AccessLink {
        self.access
    }

    pub fn access_link(&self, ap: VertexId) -> LinkId {
        self.graph.links.len() + ap
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    pub fn link_load(&self, id: LinkId) -> u32 {
        self.load[id]
    }

    pub fn transfers(&self) -> impl Iterator<Item = &Transfer> {
        self.transfers.values()
    }

    pub fn transfer(&self, id: TransferId) -> Option<&Transfer> {
        self.transfers.get(&id)
    }

    /// Latency distances to `dst`, cached per destination.
    pub fn distances_to(&mut self, dst: VertexId) -> &[f64] {
        let graph = &self.graph;
        &self
            .to_vertex
            .entry(dst)
            .or_insert_with(|| graph.shortest_tree(dst))
            .0
    }

    pub fn route(&mut self, src: VertexId, dst: VertexId) -> Result<Route> {
        self.distances_to(dst);
        self.graph.route_with(src, dst, &self.to_vertex[&dst])
    }

    /// Propagation estimate device -> (access link of `ap`) -> `server`.
    pub fn device_propagation(&mut self, ap: VertexId, server: VertexId) -> f64 {
        self.access.latency + self.distances_to(server)[ap]
    }

    /// Decision-time uplink/downlink rate estimate at `ap`, bits/s.
    pub fn access_rate_estimate(&self, ap: VertexId) -> f64 {
        let active = self.load[self.access_link(ap)].max(1);
        self.access.bandwidth * MBPS / f64::from(active)
    }

    /// Links from a device at `ap` to `server`, access link first.
    pub fn device_path(&mut self, ap: VertexId, server: VertexId) -> Result<(Vec<LinkId>, f64)> {
        let r = self.route(ap, server)?;
        let mut path = Vec::with_capacity(r.links.len() + 1);
        path.push(self.access_link(ap));
        path.extend(r.links);
        Ok((path, self.access.latency + r.propagation))
    }

    /// Moves every transfer forward to `now` at its current rate.
    pub fn advance(&mut self, now: f64) {
        let dt = now - self.last_advance;
        if dt > 0.0 {
            for t in self.transfers.values_mut() {
                if t.rate.is_finite() {
                    t.remaining = (t.remaining - t.rate * dt).max(0.0);
                } else {
                    t.remaining = 0.0;
                }
            }
        }
        self.last_advance = self.last_advance.max(now);
    }

    fn rate_of(&self, path: &[LinkId]) -> f64 {
        path.iter()
            .map(|&l| self.links[l].bandwidth * MBPS / f64::from(self.load[l].max(1)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Reassigns fair-share rates; returns transfers whose prediction moved.
    fn reallocate(&mut self, now: f64, force: Option<TransferId>) -> Vec<Prediction> {
        let ids: Vec<TransferId> = self.transfers.keys().copied().collect();
        let mut out = Vec::new();
        for id in ids {
            let rate = self.rate_of(&self.transfers[&id].path);
            let t = self.transfers.get_mut(&id).unwrap();
            if rate != t.rate || force == Some(id) {
                t.rate = rate;
                t.generation += 1;
                let done_at = if rate.is_finite() {
                    now + t.remaining / rate
                } else {
                    now
                };
                out.push(Prediction {
                    transfer: id,
                    generation: t.generation,
                    done_at,
                });
            }
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    pub fn start(
        &mut self,
        now: f64,
        task: u64,
        direction: Direction,
        device: Option<usize>,
        server_vertex: VertexId,
        path: Vec<LinkId>,
        propagation: f64,
        bits: f64,
    ) -> (TransferId, Vec<Prediction>) {
        self.advance(now);
        let id = self.next_id;
        self.next_id += 1;
        for &l in &path {
            self.load[l] += 1;
        }
        self.transfers.insert(
            id,
            Transfer {
                id,
                task,
                direction,
                device,
                server_vertex,
                path,
                total_bits: bits,
                remaining: bits,
                rate: f64::NAN,
                started: now,
                propagation,
                generation: 0,
            },
        );
        (id, self.reallocate(now, Some(id)))
    }

    fn release(&mut self, t: &Transfer) {
        for &l in &t.path {
            self.load[l] -= 1;
        }
    }

    /// Finishes a transfer if `generation` is still current.
    pub fn complete(
        &mut self,
        now: f64,
        id: TransferId,
        generation: u64,
    ) -> Option<(Completed, Vec<Prediction>)> {
        if self.transfers.get(&id)?.generation != generation {
            return None;
        }
        self.advance(now);
        let mut t = self.transfers.remove(&id).unwrap();
        t.remaining = 0.0;
        self.release(&t);
        let preds = self.reallocate(now, None);
        Some((
            Completed {
                transfer: t,
                finished_at: now,
            },
            preds,
        ))
    }

    /// Drops a transfer without delivering it.
    pub fn cancel(&mut self, now: f64, id: TransferId) -> Vec<Prediction> {
        self.advance(now);
        if let Some(t) = self.transfers.remove(&id) {
            self.release(&t);
        }
        self.reallocate(now, None)
    }

    /// Periodic update: advances to `now`, completes transfers that ran dry
    /// (completion time interpolated inside the interval) and reallocates.
    pub fn tick(&mut self, now: f64) -> (Vec<Completed>, Vec<Prediction>) {
        let from = self.last_advance;
        let before: Vec<(TransferId, f64, f64)> = self
            .transfers
            .values()
            .map(|t| (t.id, t.remaining, t.rate))
            .collect();
        self.advance(now);
        let mut done = Vec::new();
        for (id, remaining_before, rate) in before {
            if self.transfers[&id].remaining <= BIT_EPS {
                let mut t = self.transfers.remove(&id).unwrap();
                t.remaining = 0.0;
                self.release(&t);
                let finished_at = if rate.is_finite() && rate > 0.0 {
                    (from + remaining_before / rate).min(now)
                } else {
                    from
                };
                done.push(Completed {
                    transfer: t,
                    finished_at,
                });
            }
        }
        let preds = self.reallocate(now, None);
        (done, preds)
    }

    /// Points an in-flight transfer at the device's new access point.
    /// Remaining bits are preserved.
    pub fn reroute(&mut self, now: f64, id: TransferId, new_ap: VertexId) -> Result<Vec<Prediction>> {
        self.advance(now);
        let Some(origin) = self.transfers.get(&id).map(|t| t.server_vertex) else {
            return Ok(Vec::new());
        };
        let route = self.route(origin, new_ap)?;
        let mut t = self.transfers.remove(&id).unwrap();
        self.release(&t);
        let mut path = route.links;
        path.push(self.access_link(new_ap));
        for &l in &path {
            self.load[l] += 1;
        }
        t.path = path;
        t.propagation = route.propagation + self.access.latency;
        self.transfers.insert(id, t);
        Ok(self.reallocate(now, Some(id)))
    }

    /// Sum of granted rates per link, bits/s.
    pub fn link_rates(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.links.len()];
        for t in self.transfers.values() {
            for &l in &t.path {
                sums[l] += t.rate;
            }
        }
        sums
    }
}
