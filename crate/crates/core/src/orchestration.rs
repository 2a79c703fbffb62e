//! Offloading decisions for the three control topologies.
//!
//! A device compares local execution against remote destinations (servers
//! or clusters) by the weighted cost
//!
//! `w_d * D / D_max + w_e * E / B_e + w_p * p / p_pref`
//!
//! A destination is feasible only if its energy fits in the battery. When
//! nothing is feasible the task runs locally anyway. Ties prefer local, then
//! the lowest destination index, so a device offloads only on strict
//! improvement (except in the centralized topology, see
//! [`decide_centralized`]).

use crate::model::ImportanceWeights;
use crate::node::{local_exec_energy, tx_rx_energy};

/// Reference willingness to pay per MI.
pub const P_PREF: f64 = 0.01;

/// Delay, energy and price of one destination for one task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    /// Seconds.
    pub delay: f64,
    /// Joules spent by the device.
    pub energy: f64,
    /// Price per MI (0 for local).
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Choice {
    Local,
    /// Index into the remote quote list.
    Remote(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffloadDecision {
    pub choice: Choice,
    pub cost: f64,
    /// False only when local was forced although its energy exceeds the battery.
    pub feasible: bool,
    /// Cost evaluations made.
    pub evaluations: usize,
}

/// What the device knows about itself when deciding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionContext {
    pub weights: ImportanceWeights,
    /// Task latency constraint, seconds.
    pub deadline: f64,
    /// Remaining battery in joules (infinite for mains power).
    pub battery: f64,
    pub p_pref: f64,
}

fn raw_cost(q: &Quote, ctx: &DecisionContext) -> f64 {
    let w = &ctx.weights;
    let energy_term = if ctx.battery.is_infinite() { 0.0 } else { q.energy / ctx.battery };
    w.delay * q.delay / ctx.deadline + w.energy * energy_term + w.price * q.price / ctx.p_pref
}

/// Weighted cost of `quote`, or `None` if its energy exceeds the battery.
pub fn destination_cost(q: &Quote, ctx: &DecisionContext) -> Option<f64> {
    (q.energy <= ctx.battery).then(|| raw_cost(q, ctx))
}

/// Argmin over the feasible destinations, local first, in one linear pass.
/// Local is the fallback when nothing is feasible.
fn argmin(local: &Quote, remotes: &[Quote], ctx: &DecisionContext) -> OffloadDecision {
    let mut best: Option<(Choice, f64)> = destination_cost(local, ctx).map(|c| (Choice::Local, c));
    for (j, q) in remotes.iter().enumerate() {
        if let Some(c) = destination_cost(q, ctx) {
            if best.is_none_or(|(_, b)| c < b) {
                best = Some((Choice::Remote(j), c));
            }
        }
    }
    finish(best, local, ctx, remotes.len() + 1)
}

fn finish(best: Option<(Choice, f64)>, local: &Quote, ctx: &DecisionContext, evaluations: usize) -> OffloadDecision {
    match best {
        Some((choice, cost)) => OffloadDecision {
            choice,
            cost,
            feasible: true,
            evaluations,
        },
        None => {
            log::debug!("no feasible destination; executing locally");
            OffloadDecision {
                choice: Choice::Local,
                cost: raw_cost(local, ctx),
                feasible: false,
                evaluations,
            }
        }
    }
}

/// One quote per server.
pub fn decide_decentralized(local: &Quote, servers: &[Quote], ctx: &DecisionContext) -> OffloadDecision {
    argmin(local, servers, ctx)
}

/// One quote per cluster; delay covers the path to the head plus the head's
/// published cluster estimate.
pub fn decide_hybrid(local: &Quote, clusters: &[Quote], ctx: &DecisionContext) -> OffloadDecision {
    argmin(local, clusters, ctx)
}

/// The central orchestrator picks the cheapest feasible server (lowest index
/// on ties), then the device offloads iff that server's cost is at most the
/// local cost, or local execution is infeasible.
pub fn decide_centralized(local: &Quote, servers: &[Quote], ctx: &DecisionContext) -> OffloadDecision {
    let mut server: Option<(usize, f64)> = None;
    for (j, q) in servers.iter().enumerate() {
        if let Some(c) = destination_cost(q, ctx) {
            if server.is_none_or(|(_, b)| c < b) {
                server = Some((j, c));
            }
        }
    }
    let best = match (server, destination_cost(local, ctx)) {
        (Some((j, c)), Some(lc)) if c <= lc => Some((Choice::Remote(j), c)),
        (_, Some(lc)) => Some((Choice::Local, lc)),
        (Some((j, c)), None) => Some((Choice::Remote(j), c)),
        (None, None) => None,
    };
    finish(best, local, ctx, servers.len() + 1)
}

/// Member with the fewest tasks (queued plus executing); lowest id on ties.
/// `members` holds `(server id, task count)`.
pub fn allocate_in_cluster(members: &[(usize, usize)]) -> usize {
    members
        .iter()
        .min_by_key(|&&(id, load)| (load, id))
        .map(|&(id, _)| id)
        .expect("cluster has members")
}

/// Local quote: own execution time plus the local queue, energy `E_0`.
pub fn local_quote(length: f64, cores: u32, mips_per_core: f64, queued_mi: f64, max_power: f64) -> Quote {
    Quote {
        delay: length / mips_per_core + queued_mi / (f64::from(cores) * mips_per_core),
        energy: local_exec_energy(max_power, length, cores, mips_per_core),
        price: 0.0,
    }
}

/// Inputs for a remote quote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemoteTerms {
    pub input_bits: f64,
    pub output_bits: f64,
    /// Upload and download rate estimates, bits per second.
    pub rate_up: f64,
    pub rate_down: f64,
    pub propagation: f64,
    pub length: f64,
    pub mips_per_core: f64,
    /// Published queue-time estimate, seconds.
    pub queue_estimate: f64,
    pub price: f64,
    pub tx_power: f64,
    pub rx_power: f64,
}

pub fn remote_quote(t: &RemoteTerms) -> Quote {
    Quote {
        delay: t.input_bits / t.rate_up
            + t.output_bits / t.rate_down
            + t.propagation
            + t.length / t.mips_per_core
            + t.queue_estimate,
        energy: tx_rx_energy(t.tx_power, t.rx_power, t.input_bits, t.output_bits, t.rate_up, t.rate_down),
        price: t.price,
    }
}
