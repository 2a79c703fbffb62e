//! Episode runner: drives devices, servers, the network and the pricing
//! agents through one simulated episode and writes its logs.

mod build;

pub use build::{apportion, AgentDomain, Layout, ServerInfo};

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::agents::{model_path, reward_hybrid, Hyperparams, Mode, STATE_DIM};
use crate::engine::{EventKind, EventQueue, NetworkEvent, NodeRef};
use crate::error::{Error, Result};
use crate::io::config::ScenarioConfig;
use crate::io::logs::{
    write_rows, write_rows_with_header, AgentRow, NodeRow, RunRow, TaskRow, AGENTS_DIR, AGENT_HEADER, NODES_CSV,
    RUN_CSV, TASKS_CSV, TASK_HEADER,
};
use crate::io::properties::Topology;
use crate::model::{
    generate_weights, sample_task, Destination, DeviceTypeSpec, ImportanceWeights, PoissonArrivals, Task, TaskStatus,
    J_PER_WH,
};
use crate::network::{Completed, Direction, Prediction, VertexId};
use crate::node::{
    estimate_queue_time_cluster, estimate_queue_time_server, local_exec_energy, tick_energy, CpuState, EnergyState,
    MobilityParams, MobilityState, Started,
};
use crate::orchestration::{
    allocate_in_cluster, decide_centralized, decide_decentralized, decide_hybrid, local_quote, remote_quote, Choice,
    DecisionContext, Quote, RemoteTerms, P_PREF,
};
use crate::seed::{SeedManager, Stream};
use crate::Agent;

/// Bits per megabyte, for RAM and storage admission.
const BITS_PER_MB: f64 = 8e6;

/// Who sets the prices.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Pricing {
    /// DDPG agents, trained or evaluated according to the scenario mode.
    #[default]
    Agents,
    /// Uniform random price each slot; nothing is loaded, learned or saved.
    UniformRandom,
    /// The same price in every slot; nothing is loaded, learned or saved.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentLog {
    pub id: String,
    pub rows: Vec<AgentRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub run: RunRow,
    pub agents: Vec<AgentLog>,
    pub tasks: Vec<TaskRow>,
    pub nodes: Vec<NodeRow>,
    /// Directory the logs were written to.
    pub dir: Option<PathBuf>,
}

impl EpisodeResult {
    /// Sum of all agents' rewards.
    pub fn total_return(&self) -> f64 {
        self.agents
            .iter()
            .map(|a| a.rows.last().map_or(0.0, |r| r.cumulative_reward))
            .sum()
    }
}

struct Device {
    spec: DeviceTypeSpec,
    app: usize,
    mobility: MobilityParams,
    position: MobilityState,
    mobility_rng: Stream,
    arrivals: PoissonArrivals<Stream>,
    taskgen: Stream,
    weights: ImportanceWeights,
    cpu: CpuState,
    energy: EnergyState,
    ap: VertexId,
    died_at: Option<f64>,
    billed: f64,
}

struct Server {
    cpu: CpuState,
    energy: EnergyState,
    free_ram: f64,
    free_storage: f64,
    billed: f64,
}

struct PricingAgent {
    domain: AgentDomain,
    learner: Option<Agent>,
    act_rng: Stream,
    update_rng: Stream,
    slot: u64,
    state: [f64; STATE_DIM],
    price: f64,
    raw: f64,
    slot_mi: f64,
    slot_arrivals: u64,
    cumulative: f64,
    rows: Vec<AgentRow>,
    /// Queue-time estimate published at the start of the slot, per domain
    /// member (decentralized, centralized) or for the cluster (hybrid).
    estimates: Vec<f64>,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    hp: &'a Hyperparams,
    pricing: Pricing,
    horizon: f64,
    layout: Layout,
    queue: EventQueue,
    devices: Vec<Device>,
    servers: Vec<Server>,
    agents: Vec<PricingAgent>,
    tasks: Vec<Task>,
    task_slot: Vec<Option<u64>>,
    /// Server an upload is addressed to (the head in hybrid).
    upload_target: Vec<usize>,
    last_tick: f64,
    price_updates: u64,
    mobility_rounds: u64,
    network_rounds: u64,
}

/// Runs one episode and writes its logs to `out_dir`.
pub fn run_episode(cfg: &ScenarioConfig, out_dir: &Path) -> Result<EpisodeResult> {
    run_episode_with(cfg, Some(out_dir), Pricing::Agents)
}

/// Runs one episode. Logs are written only when `out_dir` is given.
pub fn run_episode_with(cfg: &ScenarioConfig, out_dir: Option<&Path>, pricing: Pricing) -> Result<EpisodeResult> {
    let mut sim = Sim::new(cfg, pricing).map_err(|e| Error::Scenario {
        scenario: cfg.name.clone(),
        source: Box::new(e),
    })?;
    sim.run()?;
    if pricing == Pricing::Agents && cfg.mode == Mode::Train {
        for a in &mut sim.agents {
            let learner = a.learner.as_mut().expect("train mode has learners");
            learner.episodes += 1;
            learner.save(&model_path(&cfg.folders.models, &cfg.name, &a.domain.id))?;
        }
    }
    let mut result = sim.into_result();
    if let Some(dir) = out_dir {
        write_episode(dir, &result)?;
        result.dir = Some(dir.to_path_buf());
    }
    Ok(result)
}

fn write_episode(dir: &Path, r: &EpisodeResult) -> Result<()> {
    write_rows_with_header(&dir.join(TASKS_CSV), TASK_HEADER, &r.tasks)?;
    for a in &r.agents {
        let path = dir.join(AGENTS_DIR).join(format!("{}.csv", a.id));
        write_rows_with_header(&path, AGENT_HEADER, &a.rows)?;
    }
    write_rows(&dir.join(NODES_CSV), &r.nodes)?;
    write_rows(&dir.join(RUN_CSV), std::slice::from_ref(&r.run))
}

fn load_learners(cfg: &ScenarioConfig, domains: &[AgentDomain], seeds: &SeedManager) -> Result<Vec<Agent>> {
    let hp = &cfg.hyper;
    let paths: Vec<PathBuf> = domains
        .iter()
        .map(|d| model_path(&cfg.folders.models, &cfg.name, &d.id))
        .collect();
    if cfg.mode == Mode::Evaluate {
        let missing: Vec<usize> = (0..domains.len()).filter(|&i| !paths[i].is_file()).collect();
        match missing[..] {
            [] => {}
            [i] => {
                return Err(Error::MissingModel {
                    agent: domains[i].id.clone(),
                    path: paths[i].clone(),
                })
            }
            _ => return Err(Error::MissingModels(missing.iter().map(|&i| domains[i].id.clone()).collect())),
        }
    }
    domains
        .iter()
        .zip(&paths)
        .enumerate()
        .map(|(i, (d, path))| {
            let mut agent = match Agent::load(path, &d.id) {
                Ok(a) => a,
                Err(Error::MissingModel { .. }) if cfg.mode == Mode::Train => {
                    Agent::new(hp, &mut seeds.derive_stream("init", i as u64))
                }
                Err(e) => return Err(e),
            };
            agent.configure(hp);
            Ok(agent)
        })
        .collect()
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, pricing: Pricing) -> Result<Self> {
        let inputs = &cfg.inputs;
        let p = &inputs.params;
        let hp = &cfg.hyper;
        hp.validate()?;
        let layout = Layout::build(inputs)?;
        let seeds = SeedManager::new(cfg.seed);
        let horizon = p.horizon_seconds();

        // device types and applications in contiguous blocks, applications
        // shuffled so they are not correlated with the type
        let n = p.device_count;
        let type_counts = apportion(n, &inputs.devices.iter().map(|d| d.share).collect::<Vec<_>>());
        let types: Vec<usize> = type_counts.iter().enumerate().flat_map(|(t, &c)| std::iter::repeat_n(t, c)).collect();
        let app_counts = apportion(
            n,
            &inputs.applications.iter().map(|a| a.device_share).collect::<Vec<_>>(),
        );
        let mut apps: Vec<usize> = app_counts.iter().enumerate().flat_map(|(a, &c)| std::iter::repeat_n(a, c)).collect();
        apps.shuffle(&mut seeds.derive_stream("applications", 0));

        let mut devices = Vec::with_capacity(n);
        for d in 0..n {
            let spec = inputs.devices[types[d]].clone();
            let app = apps[d];
            let mobility = MobilityParams::from_spec(&spec, p.area_side);
            let mut mobility_rng = seeds.derive_stream("mobility", d as u64);
            let position = MobilityState::new(&mobility, &mut mobility_rng);
            let rate = if spec.generates_tasks {
                inputs.applications[app].poisson_rate
            } else {
                0.0
            };
            let energy = if spec.battery_powered {
                EnergyState::battery(spec.battery_capacity * J_PER_WH, spec.initial_battery)
            } else {
                EnergyState::mains()
            };
            devices.push(Device {
                app,
                mobility,
                ap: layout.nearest_ap(position.location),
                position,
                mobility_rng,
                arrivals: PoissonArrivals::new(rate, horizon, seeds.derive_stream("arrivals", d as u64)),
                taskgen: seeds.derive_stream("taskgen", d as u64),
                weights: generate_weights(&mut seeds.derive_stream("weights", d as u64)),
                cpu: CpuState::new(spec.cores, spec.mips_per_core),
                energy,
                died_at: None,
                billed: 0.0,
                spec,
            });
        }
        let servers = layout
            .servers
            .iter()
            .map(|s| Server {
                cpu: CpuState::new(s.spec.cores, s.spec.mips_per_core),
                energy: EnergyState::mains(),
                free_ram: s.spec.ram,
                free_storage: s.spec.storage,
                billed: 0.0,
            })
            .collect();

        let mut learners = match (pricing, cfg.mode) {
            (Pricing::UniformRandom | Pricing::Fixed(_), _) => None,
            (Pricing::Agents, _) => Some(load_learners(cfg, &layout.agents, &seeds)?.into_iter()),
        };
        let agents = layout
            .agents
            .iter()
            .enumerate()
            .map(|(i, d)| PricingAgent {
                estimates: vec![0.0; if d.entry.is_some() { 1 } else { d.members.len() }],
                domain: d.clone(),
                learner: learners.as_mut().and_then(Iterator::next),
                act_rng: seeds.derive_stream("agent", i as u64),
                update_rng: seeds.derive_stream("replay", i as u64),
                slot: 0,
                state: [0.0; STATE_DIM],
                price: 0.0,
                raw: -1.0,
                slot_mi: 0.0,
                slot_arrivals: 0,
                cumulative: 0.0,
                rows: Vec::new(),
            })
            .collect();

        Ok(Self {
            cfg,
            hp,
            pricing,
            horizon,
            layout,
            queue: EventQueue::new(horizon),
            devices,
            servers,
            agents,
            tasks: Vec::new(),
            task_slot: Vec::new(),
            upload_target: Vec::new(),
            last_tick: 0.0,
            price_updates: 0,
            mobility_rounds: 0,
            network_rounds: 0,
        })
    }

    fn run(&mut self) -> Result<()> {
        let t_end = self.horizon;
        let p = &self.cfg.inputs.params;
        self.queue.schedule(t_end, EventKind::SimulationEnd);
        if t_end > 0.0 {
            for a in 0..self.agents.len() {
                self.queue.schedule(0.0, EventKind::PriceUpdate { agent: a });
            }
        }
        let rounds = (t_end / p.update_interval + 1e-9).floor() as u64;
        for k in 1..=rounds {
            self.queue.schedule(k as f64 * p.update_interval, EventKind::MobilityEnergyUpdate);
        }
        let rounds = (t_end / p.network_update_interval + 1e-9).floor() as u64;
        for k in 1..=rounds {
            self.queue
                .schedule(k as f64 * p.network_update_interval, EventKind::NetworkUpdate(NetworkEvent::Tick));
        }
        for d in 0..self.devices.len() {
            self.schedule_next_arrival(d);
        }

        while let Some(ev) = self.queue.pop() {
            let now = ev.fire_time;
            match ev.kind {
                EventKind::TaskGeneration { device } => self.on_task_generation(now, device)?,
                EventKind::PriceUpdate { agent } => self.on_price_update(now, agent),
                EventKind::MobilityEnergyUpdate => self.on_mobility_energy(now)?,
                EventKind::NetworkUpdate(NetworkEvent::Tick) => {
                    self.network_rounds += 1;
                    let (mut done, preds) = self.layout.network.tick(now);
                    done.sort_by(|a, b| {
                        a.finished_at
                            .total_cmp(&b.finished_at)
                            .then(a.transfer.id.cmp(&b.transfer.id))
                    });
                    self.schedule_predictions(now, &preds);
                    for c in done {
                        self.on_transfer_done(now, c)?;
                    }
                }
                EventKind::NetworkUpdate(NetworkEvent::TransferDone { transfer, generation }) => {
                    if let Some((c, preds)) = self.layout.network.complete(now, transfer, generation) {
                        self.schedule_predictions(now, &preds);
                        self.on_transfer_done(now, c)?;
                    }
                }
                EventKind::TaskArrivedAtNode { task, server } => self.on_arrival(now, task, server),
                EventKind::ExecutionFinished { node, task } => self.on_execution_finished(now, node, task)?,
                EventKind::ResultDelivered { task } => self.on_delivered(now, task),
                EventKind::SimulationEnd => {
                    self.on_end(now);
                    break;
                }
            }
        }
        Ok(())
    }

    fn schedule_next_arrival(&mut self, d: usize) {
        if let Some(t) = self.devices[d].arrivals.next() {
            if t < self.horizon {
                self.queue.schedule(t, EventKind::TaskGeneration { device: d });
            }
        }
    }

    fn schedule_predictions(&mut self, now: f64, preds: &[Prediction]) {
        for p in preds {
            self.queue.schedule(
                p.done_at.max(now),
                EventKind::NetworkUpdate(NetworkEvent::TransferDone {
                    transfer: p.transfer,
                    generation: p.generation,
                }),
            );
        }
    }

    fn agent_of_server(&self, j: usize) -> usize {
        match self.layout.topology {
            Topology::Decentralized => j,
            Topology::Centralized => 0,
            Topology::Hybrid => self.layout.servers[j].cluster.expect("hybrid servers have clusters"),
        }
    }

    fn on_task_generation(&mut self, now: f64, d: usize) -> Result<()> {
        if self.devices[d].died_at.is_some() {
            return Ok(());
        }
        let id = self.tasks.len() as u64;
        let dev = &mut self.devices[d];
        let task = sample_task(id, &self.cfg.inputs.applications[dev.app], d, now, &mut dev.taskgen);
        self.tasks.push(task);
        self.task_slot.push(None);
        self.upload_target.push(usize::MAX);
        self.schedule_next_arrival(d);

        let dev = &self.devices[d];
        let task = &self.tasks[id as usize];
        let ctx = DecisionContext {
            weights: dev.weights,
            deadline: task.deadline,
            battery: dev.energy.available(),
            p_pref: P_PREF,
        };
        let local = local_quote(
            task.length,
            dev.spec.cores,
            dev.spec.mips_per_core,
            dev.cpu.queued_mi(now),
            dev.spec.max_power,
        );
        let rate = self.layout.network.access_rate_estimate(dev.ap);
        let ap = dev.ap;
        let (tx, rx) = (dev.spec.tx_power, dev.spec.rx_power);
        let (input_bits, output_bits, length) = (task.input_bits, task.output_bits, task.length);

        // (server that receives the upload, quote) per destination
        let mut targets = Vec::new();
        let mut quotes: Vec<Quote> = Vec::new();
        for a in &self.agents {
            let entries: Vec<(usize, f64)> = match a.domain.entry {
                Some(head) => vec![(head, a.estimates[0])],
                None => a.domain.members.iter().copied().zip(a.estimates.iter().copied()).collect(),
            };
            for (j, estimate) in entries {
                let s = &self.layout.servers[j];
                let propagation = self.layout.network.device_propagation(ap, s.vertex);
                targets.push(j);
                quotes.push(remote_quote(&RemoteTerms {
                    input_bits,
                    output_bits,
                    rate_up: rate,
                    rate_down: rate,
                    propagation,
                    length,
                    mips_per_core: s.spec.mips_per_core,
                    queue_estimate: estimate,
                    price: a.price,
                    tx_power: tx,
                    rx_power: rx,
                }));
            }
        }
        let decision = match self.layout.topology {
            Topology::Decentralized => decide_decentralized(&local, &quotes, &ctx),
            Topology::Hybrid => decide_hybrid(&local, &quotes, &ctx),
            Topology::Centralized => decide_centralized(&local, &quotes, &ctx),
        };

        match decision.choice {
            Choice::Remote(k) => {
                let j = targets[k];
                let a = self.agent_of_server(j);
                let agent = &mut self.agents[a];
                agent.slot_mi += length;
                agent.slot_arrivals += 1;
                let task = &mut self.tasks[id as usize];
                task.destination = Destination::Server(j);
                task.agent = Some(a);
                task.price = agent.price;
                task.upload_start = Some(now);
                self.task_slot[id as usize] = Some(agent.slot);
                self.upload_target[id as usize] = j;
                let vertex = self.layout.servers[j].vertex;
                let (path, prop) = self.layout.network.device_path(ap, vertex)?;
                let (_, preds) =
                    self.layout
                        .network
                        .start(now, id, Direction::UploadInput, Some(d), vertex, path, prop, input_bits);
                self.schedule_predictions(now, &preds);
            }
            Choice::Local => {
                let started = self.devices[d].cpu.submit(now, id, length);
                self.mark_submitted(id, NodeRef::Device(d), started);
            }
        }
        Ok(())
    }

    fn mark_submitted(&mut self, id: u64, node: NodeRef, started: Option<Started>) {
        self.tasks[id as usize].set_status(TaskStatus::Queued);
        if let Some(s) = started {
            self.mark_started(node, s);
        }
    }

    fn mark_started(&mut self, node: NodeRef, s: Started) {
        let task = &mut self.tasks[s.task as usize];
        task.set_status(TaskStatus::Executing);
        task.exec_start = Some(s.start);
        self.queue
            .schedule(s.finish, EventKind::ExecutionFinished { node, task: s.task });
    }

    fn on_transfer_done(&mut self, now: f64, c: Completed) -> Result<()> {
        let t = c.transfer;
        let id = t.task as usize;
        let d = self.tasks[id].origin_device;
        let duration = (c.finished_at - t.started).max(0.0);
        match t.direction {
            Direction::UploadInput => {
                if self.devices[d].died_at.is_some() {
                    self.fail(id, TaskStatus::FailedDeviceDead);
                    return Ok(());
                }
                let joules = self.devices[d].spec.tx_power * duration;
                if !self.devices[d].energy.draw(joules) {
                    self.fail(id, TaskStatus::FailedEnergy);
                    self.kill_device(now, d);
                    return Ok(());
                }
                self.tasks[id].upload_end = Some(c.finished_at);
                self.queue.schedule(
                    (c.finished_at + t.propagation).max(now),
                    EventKind::TaskArrivedAtNode {
                        task: t.task,
                        server: self.upload_target[id],
                    },
                );
            }
            Direction::DownloadResult | Direction::Reroute => {
                self.tasks[id].download_end = Some(c.finished_at);
                self.queue.schedule(
                    (c.finished_at + t.propagation).max(now),
                    EventKind::ResultDelivered { task: t.task },
                );
            }
        }
        Ok(())
    }

    fn fail(&mut self, id: usize, status: TaskStatus) {
        let task = &mut self.tasks[id];
        if !task.status.is_terminal() {
            task.set_status(status);
        }
    }

    fn on_arrival(&mut self, now: f64, id: u64, target: usize) {
        let i = id as usize;
        if self.tasks[i].status.is_terminal() {
            return;
        }
        let j = match self.layout.topology {
            Topology::Hybrid => {
                let a = self.agent_of_server(target);
                let loads: Vec<(usize, usize)> = self.agents[a]
                    .domain
                    .members
                    .iter()
                    .map(|&m| (m, self.servers[m].cpu.task_count()))
                    .collect();
                allocate_in_cluster(&loads)
            }
            _ => target,
        };
        let task = &mut self.tasks[i];
        task.destination = Destination::Server(j);
        task.arrival = Some(now);
        let need = task.container_bits / BITS_PER_MB;
        let server = &mut self.servers[j];
        if need > server.free_ram || need > server.free_storage {
            task.rejected = true;
            task.set_status(TaskStatus::FailedLatency);
            log::debug!("task {id} rejected by {}: no room for the container", self.layout.servers[j].name);
            return;
        }
        server.free_ram -= need;
        server.free_storage -= need;
        let length = task.length;
        let started = server.cpu.submit(now, id, length);
        self.mark_submitted(id, NodeRef::Server(j), started);
    }

    fn on_execution_finished(&mut self, now: f64, node: NodeRef, id: u64) -> Result<()> {
        let (found, next) = match node {
            NodeRef::Device(d) => self.devices[d].cpu.finish(now, id),
            NodeRef::Server(j) => self.servers[j].cpu.finish(now, id),
        };
        if !found {
            return Ok(());
        }
        if let Some(s) = next {
            self.mark_started(node, s);
        }
        let i = id as usize;
        self.tasks[i].exec_end = Some(now);
        match node {
            NodeRef::Device(d) => {
                let dev = &mut self.devices[d];
                let e0 = local_exec_energy(
                    dev.spec.max_power,
                    self.tasks[i].length,
                    dev.spec.cores,
                    dev.spec.mips_per_core,
                );
                if !dev.energy.draw(e0) {
                    self.fail(i, TaskStatus::FailedEnergy);
                    self.kill_device(now, d);
                    return Ok(());
                }
                let task = &mut self.tasks[i];
                task.delivered = Some(now);
                let ok = task.elapsed(now) <= task.deadline;
                task.set_status(if ok { TaskStatus::DoneSuccess } else { TaskStatus::FailedLatency });
            }
            NodeRef::Server(j) => {
                let need = self.tasks[i].container_bits / BITS_PER_MB;
                let server = &mut self.servers[j];
                server.free_ram += need;
                server.free_storage += need;
                let d = self.tasks[i].origin_device;
                let ap = self.devices[d].ap;
                let vertex = self.layout.servers[j].vertex;
                let route = self.layout.network.route(vertex, ap)?;
                let mut path = route.links;
                path.push(self.layout.network.access_link(ap));
                let prop = route.propagation + self.layout.network.access().latency;
                let bits = self.tasks[i].output_bits;
                self.tasks[i].download_start = Some(now);
                let (_, preds) = self
                    .layout
                    .network
                    .start(now, id, Direction::DownloadResult, Some(d), vertex, path, prop, bits);
                self.schedule_predictions(now, &preds);
            }
        }
        Ok(())
    }

    fn on_delivered(&mut self, now: f64, id: u64) {
        let i = id as usize;
        let d = self.tasks[i].origin_device;
        if self.tasks[i].status.is_terminal() {
            return;
        }
        if self.devices[d].died_at.is_some() {
            self.fail(i, TaskStatus::FailedDeviceDead);
            return;
        }
        let task = &self.tasks[i];
        let duration = task.download_end.unwrap_or(now) - task.download_start.unwrap_or(now);
        let joules = self.devices[d].spec.rx_power * duration.max(0.0);
        if !self.devices[d].energy.draw(joules) {
            self.fail(i, TaskStatus::FailedEnergy);
            self.kill_device(now, d);
            return;
        }
        let task = &mut self.tasks[i];
        task.delivered = Some(now);
        let ok = task.elapsed(now) <= task.deadline;
        task.set_status(if ok { TaskStatus::DoneSuccess } else { TaskStatus::FailedLatency });
    }

    fn kill_device(&mut self, now: f64, d: usize) {
        if self.devices[d].died_at.is_some() {
            return;
        }
        self.devices[d].died_at = Some(now);
        for id in self.devices[d].cpu.clear(now) {
            self.fail(id as usize, TaskStatus::FailedDeviceDead);
        }
        log::debug!("device {d} ran out of battery at {now}");
    }

    fn on_mobility_energy(&mut self, now: f64) -> Result<()> {
        self.mobility_rounds += 1;
        let dt = self.cfg.inputs.params.update_interval;
        for d in 0..self.devices.len() {
            let dev = &mut self.devices[d];
            if dev.died_at.is_some() || dev.mobility.is_static() {
                continue;
            }
            let at = dev.position.update(now, dt, &dev.mobility, &mut dev.mobility_rng);
            let ap = self.layout.nearest_ap(at);
            if ap != self.devices[d].ap {
                self.devices[d].ap = ap;
                let moving: Vec<u64> = self
                    .layout
                    .network
                    .transfers()
                    .filter(|t| t.device == Some(d) && t.direction == Direction::DownloadResult)
                    .map(|t| t.id)
                    .collect();
                for t in moving {
                    let preds = self.layout.network.reroute(now, t, ap)?;
                    self.schedule_predictions(now, &preds);
                }
            }
        }
        self.bill_energy(now, now - self.last_tick, true);
        self.last_tick = now;
        Ok(())
    }

    /// Charges idle and busy energy for the interval ending at `now`.
    fn bill_energy(&mut self, now: f64, dt: f64, may_die: bool) {
        if dt <= 0.0 {
            return;
        }
        for s in 0..self.servers.len() {
            let spec = self.layout.servers[s].spec;
            let server = &mut self.servers[s];
            let busy = server.cpu.take_busy_core_seconds(now);
            server
                .energy
                .draw(tick_energy(spec.idle_power, spec.max_power, busy, spec.cores, dt));
            server.billed += dt;
        }
        for d in 0..self.devices.len() {
            let dev = &mut self.devices[d];
            if dev.died_at.is_some() {
                continue;
            }
            // local execution is billed per task, so the tick covers idle draw only
            let idle = dev.spec.idle_power * dt;
            let ok = dev.energy.draw(idle);
            dev.billed += dt;
            if may_die && (!ok || dev.energy.available() < idle) {
                self.kill_device(now, d);
            }
        }
    }

    fn queue_feature(&self, members: &[usize]) -> f64 {
        members
            .iter()
            .map(|&j| self.servers[j].cpu.task_count() as f64)
            .sum::<f64>()
            / members.len() as f64
    }

    /// Closes the agent's current slot: reward, log row and transition.
    fn close_slot(&mut self, a: usize, next_state: [f64; STATE_DIM]) {
        let slot_len = self.hp.slot_length;
        let agent = &mut self.agents[a];
        let reward = reward_hybrid(
            agent.price,
            agent.slot_mi,
            agent.domain.members.len(),
            &agent.domain.spec,
            self.hp.zeta,
            slot_len,
        );
        agent.cumulative += reward;
        agent.rows.push(AgentRow {
            slot: agent.slot,
            time: agent.slot as f64 * slot_len,
            queue: agent.state[0],
            arrival_rate: agent.state[1],
            price: agent.price,
            offloaded_mi: agent.slot_mi,
            reward,
            cumulative_reward: agent.cumulative,
        });
        if self.pricing == Pricing::Agents && self.cfg.mode == Mode::Train {
            let learner = agent.learner.as_mut().expect("train mode has learners");
            learner.remember(agent.state, agent.raw, reward, next_state, self.hp);
            for _ in 0..self.hp.updates_per_slot {
                learner.update(self.hp, &mut agent.update_rng);
            }
        }
    }

    fn on_price_update(&mut self, now: f64, a: usize) {
        self.price_updates += 1;
        let slot_len = self.hp.slot_length;
        let members = self.agents[a].domain.members.clone();
        let state = [
            self.queue_feature(&members),
            self.agents[a].slot_arrivals as f64 / slot_len,
        ];
        let k = (now / slot_len).round() as u64;
        if k > 0 {
            self.close_slot(a, state);
        }

        let agent = &mut self.agents[a];
        agent.slot = k;
        agent.state = state;
        agent.slot_mi = 0.0;
        agent.slot_arrivals = 0;
        match (self.pricing, agent.learner.as_mut()) {
            (Pricing::Agents, Some(learner)) => {
                let act = learner.act(state, self.cfg.mode, k, self.hp, &mut agent.act_rng);
                agent.price = act.price;
                agent.raw = act.raw;
            }
            (Pricing::Fixed(p), _) => {
                agent.price = p;
                agent.raw = 2.0 * p - 1.0;
            }
            _ => {
                agent.price = agent.act_rng.random::<f64>();
                agent.raw = 2.0 * agent.price - 1.0;
            }
        }

        let servers = &self.layout.servers;
        let estimates: Vec<f64> = match agent.domain.entry {
            Some(_) => {
                let spec = agent.domain.spec;
                let total: f64 = members.iter().map(|&j| self.servers[j].cpu.queued_mi(now)).sum();
                vec![estimate_queue_time_cluster(total, members.len(), spec.cores, spec.mips_per_core)]
            }
            None => members
                .iter()
                .map(|&j| {
                    let spec = servers[j].spec;
                    estimate_queue_time_server(self.servers[j].cpu.queued_mi(now), spec.cores, spec.mips_per_core)
                })
                .collect(),
        };
        agent.estimates = estimates;

        let next = (k + 1) as f64 * slot_len;
        if next < self.horizon {
            self.queue.schedule(next, EventKind::PriceUpdate { agent: a });
        }
    }

    fn on_end(&mut self, now: f64) {
        let slot_len = self.hp.slot_length;
        let complete_slots = (self.horizon / slot_len + 1e-9).floor() as u64;
        for a in 0..self.agents.len() {
            let agent = &self.agents[a];
            // only a slot that ends exactly at the horizon is still open and complete
            if now > 0.0 && agent.slot + 1 == complete_slots && agent.rows.len() as u64 == agent.slot {
                let members = agent.domain.members.clone();
                let state = [
                    self.queue_feature(&members),
                    self.agents[a].slot_arrivals as f64 / slot_len,
                ];
                self.close_slot(a, state);
            }
        }
        self.bill_energy(now, now - self.last_tick, false);
        self.last_tick = now;
        for s in &mut self.servers {
            s.cpu.take_busy_core_seconds(now);
        }
    }

    fn into_result(mut self) -> EpisodeResult {
        let now = self.horizon;
        let name_of = |j: usize| self.layout.servers[j].name.clone();
        let tasks: Vec<TaskRow> = self
            .tasks
            .iter()
            .zip(&self.task_slot)
            .map(|(t, &slot)| TaskRow {
                id: t.id,
                device: t.origin_device,
                creation_time: t.creation_time,
                length: t.length,
                input_bits: t.input_bits,
                output_bits: t.output_bits,
                container_bits: t.container_bits,
                deadline: t.deadline,
                destination: match t.destination {
                    Destination::Local => "local".into(),
                    Destination::Server(j) => name_of(j),
                },
                agent: t.agent.map_or_else(String::new, |a| self.agents[a].domain.id.clone()),
                slot,
                price: t.price,
                status: t.status.as_str().into(),
                rejected: t.rejected,
                upload_start: t.upload_start,
                upload_end: t.upload_end,
                arrival: t.arrival,
                exec_start: t.exec_start,
                exec_end: t.exec_end,
                download_start: t.download_start,
                download_end: t.download_end,
                delivered: t.delivered,
            })
            .collect();
        let mut nodes = Vec::with_capacity(self.servers.len() + self.devices.len());
        for (info, s) in self.layout.servers.iter().zip(&mut self.servers) {
            nodes.push(NodeRow {
                name: info.name.clone(),
                kind: "server".into(),
                cores: info.spec.cores,
                idle_power: info.spec.idle_power,
                max_power: info.spec.max_power,
                billed_seconds: s.billed,
                busy_core_seconds: s.cpu.total_busy_core_seconds(now),
                energy_j: s.energy.consumed_total,
                battery_remaining_j: None,
                died_at: None,
            });
        }
        for (d, dev) in self.devices.iter_mut().enumerate() {
            nodes.push(NodeRow {
                name: format!("device{d}"),
                kind: "device".into(),
                cores: dev.spec.cores,
                idle_power: dev.spec.idle_power,
                max_power: dev.spec.max_power,
                billed_seconds: dev.billed,
                busy_core_seconds: dev.cpu.total_busy_core_seconds(dev.died_at.unwrap_or(now)),
                energy_j: dev.energy.consumed_total,
                battery_remaining_j: dev.energy.battery.map(|b| b.remaining),
                died_at: dev.died_at,
            });
        }
        let p = &self.cfg.inputs.params;
        let run = RunRow {
            scenario: self.cfg.name.clone(),
            topology: p.topology.to_string(),
            mode: match (self.pricing, self.cfg.mode) {
                (Pricing::UniformRandom, _) => "random".into(),
                (Pricing::Fixed(_), _) => "fixed".into(),
                (_, Mode::Train) => "train".into(),
                (_, Mode::Evaluate) => "evaluate".into(),
            },
            seed: self.cfg.seed,
            simulation_time_s: self.horizon,
            slot_length_s: self.hp.slot_length,
            devices: self.devices.len(),
            servers: self.servers.len(),
            agents: self.agents.len(),
            tasks_generated: self.tasks.len() as u64,
            events_fired: self.queue.fired(),
            price_updates_per_agent: if self.agents.is_empty() {
                0
            } else {
                self.price_updates / self.agents.len() as u64
            },
            mobility_rounds: self.mobility_rounds,
            network_rounds: self.network_rounds,
            trace_hash: format!("{:016x}", self.queue.trace_hash()),
        };
        EpisodeResult {
            run,
            agents: self
                .agents
                .into_iter()
                .map(|a| AgentLog {
                    id: a.domain.id,
                    rows: a.rows,
                })
                .collect(),
            tasks,
            nodes,
            dir: None,
        }
    }
}
