//! Acceptance suite. Every criterion runs in turn and prints one line:
//!
//! ```text
//! PASS  determinism: 2 runs, 9 files identical, slowest 0.9 s
//! ```
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.
//! The test fails if any criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use edgesim::agents::{grads_iter, Activation, DdpgAgent, Hyperparams, Mlp, Mode, Transition};
use edgesim::campaign::Campaign;
use edgesim::envgen::{average_linkage, betweenness, build_twst, cluster_servers, place_aps, GenParams};
use edgesim::io::config::{parse_inputs, Folders, Inputs, ScenarioConfig};
use edgesim::io::logs::{read_rows, AgentRow, TaskRow, AGENTS_DIR, TASKS_CSV};
use edgesim::io::properties::Topology;
use edgesim::model::{generate_weights, poisson_arrivals, sample_task, ImportanceWeights, Location, TaskStatus};
use edgesim::orchestration::{
    decide_centralized, decide_decentralized, decide_hybrid, Choice, DecisionContext, OffloadDecision, Quote, P_PREF,
};
use edgesim::sim::{run_episode_with, Pricing};
use edgesim::{presets, Agent};

fn scenario_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn config(name: &str, inputs: Inputs, hyper: Hyperparams, mode: Mode, seed: u64, models: &Path) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        inputs,
        hyper,
        mode,
        seed,
        folders: Folders {
            input: PathBuf::new(),
            output: PathBuf::new(),
            models: models.to_path_buf(),
        },
    }
}

// ---------------------------------------------------------------- determinism

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> String {
    let tmp = tempfile::tempdir().unwrap();
    let models = tmp.path().join("models");
    let folders = Folders {
        input: scenario_dir("desk"),
        output: tmp.path().join("train"),
        models: models.clone(),
    };
    Campaign::load(folders, Hyperparams::default(), 42, None).unwrap().train(1, 0).unwrap();

    let mut trees = Vec::new();
    let mut slowest = Duration::ZERO;
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let start = Instant::now();
        let status = Command::new(env!("CARGO_BIN_EXE_edgesim"))
            .args(["simulate", "--seed", "42", "--input"])
            .arg(scenario_dir("desk"))
            .arg("--output")
            .arg(&out)
            .arg("--models")
            .arg(&models)
            .env("RUST_LOG", "warn")
            .status()
            .unwrap();
        slowest = slowest.max(start.elapsed());
        assert!(status.success(), "simulate failed");
        trees.push(files_under(&out));
    }
    assert!(trees[0].len() >= 5, "expected a full log tree");
    assert_eq!(trees[0].keys().collect::<Vec<_>>(), trees[1].keys().collect::<Vec<_>>());
    for (path, bytes) in &trees[0] {
        assert!(trees[1][path] == *bytes, "{} differs", path.display());
    }
    assert!(slowest < Duration::from_secs(60), "run took {slowest:?}");
    format!(
        "2 runs, {} files identical, slowest {:.1} s",
        trees[0].len(),
        slowest.as_secs_f64()
    )
}

// ---------------------------------------------------------------- slot count

fn slot_count() -> String {
    let mut inputs = parse_inputs(&scenario_dir("smoke")).unwrap();
    inputs.params.simulation_time = 60.0;
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("slots", inputs, Hyperparams::default(), Mode::Evaluate, 3, tmp.path());
    let r = run_episode_with(&cfg, None, Pricing::UniformRandom).unwrap();
    assert_eq!(r.run.price_updates_per_agent, 720);
    for a in &r.agents {
        assert_eq!(a.rows.len(), 720, "{}", a.id);
    }
    format!("{} agent(s), 720 price updates and 720 logged slots each", r.agents.len())
}

// ---------------------------------------------------------------- AP placement

fn ap_placement() -> String {
    let n = place_aps(1100.0, 45.0).len();
    assert!((222..=272).contains(&n));
    assert_eq!(n, 247);
    format!("side 1100, coverage 45 gives {n} access points")
}

// ---------------------------------------------------------------- reward oracle

/// Agent id to (servers it prices, idle W, max W, cores, MIPS per core).
fn agent_specs(inputs: &Inputs, topology: Topology) -> HashMap<String, (f64, f64, f64, f64, f64)> {
    let servers: Vec<_> = inputs.datacenters.datacenters.iter().filter(|d| d.spec.is_some()).collect();
    let row = |n: usize, s: &edgesim::model::ServerSpec| {
        (n as f64, s.idle_power, s.max_power, f64::from(s.cores), s.mips_per_core)
    };
    let mut out = HashMap::new();
    match topology {
        Topology::Decentralized => {
            for d in &servers {
                out.insert(d.name.clone(), row(1, d.spec.as_ref().unwrap()));
            }
        }
        Topology::Hybrid => {
            for head in servers.iter().filter(|d| d.cluster_head) {
                let n = servers.iter().filter(|d| d.cluster == head.cluster).count();
                out.insert(head.name.clone(), row(n, head.spec.as_ref().unwrap()));
            }
        }
        Topology::Centralized => {
            out.insert("central".into(), row(servers.len(), servers[0].spec.as_ref().unwrap()));
        }
    }
    out
}

fn reward_oracle() -> String {
    let base = parse_inputs(&scenario_dir("desk")).unwrap();
    let hp = Hyperparams::default();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for topology in Topology::ALL {
        let mut inputs = base.clone();
        inputs.params.topology = topology;
        let specs = agent_specs(&inputs, topology);
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config("oracle", inputs, hp.clone(), Mode::Train, 11, &tmp.path().join("models"));
        let out = tmp.path().join("run");
        run_episode_with(&cfg, Some(&out), Pricing::Agents).unwrap();

        let tasks: Vec<TaskRow> = read_rows(&out.join(TASKS_CSV)).unwrap();
        let mut offloaded: HashMap<(String, u64), f64> = HashMap::new();
        for t in tasks.iter().filter(|t| !t.agent.is_empty()) {
            *offloaded.entry((t.agent.clone(), t.slot.unwrap())).or_default() += t.length;
        }
        assert_eq!(specs.len(), std::fs::read_dir(out.join(AGENTS_DIR)).unwrap().count());
        for (id, &(members, idle, max, cores, mips)) in &specs {
            let rows: Vec<AgentRow> = read_rows(&out.join(AGENTS_DIR).join(format!("{id}.csv"))).unwrap();
            assert_eq!(rows.len(), 120);
            for r in &rows {
                let q = offloaded.get(&(id.clone(), r.slot)).copied().unwrap_or(0.0);
                let energy = members * hp.slot_length * idle + (max - idle) * q / (cores * mips);
                let expect = r.price * q - hp.zeta * energy;
                let err = (r.reward - expect).abs();
                worst = worst.max(err);
                assert!(err < 1e-9, "{topology} {id} slot {}: logged {} oracle {expect}", r.slot, r.reward);
                checked += 1;
            }
        }
        for t in tasks.iter().filter(|t| !t.agent.is_empty()) {
            let rows: Vec<AgentRow> = read_rows(&out.join(AGENTS_DIR).join(format!("{}.csv", t.agent))).unwrap();
            assert_eq!(t.price, rows[t.slot.unwrap() as usize].price, "task {} price", t.id);
        }
    }
    format!("{checked} agent-slots over 3 topologies, max |error| {worst:.1e}")
}

// ---------------------------------------------------------------- decision oracle

fn cost(q: &Quote, c: &DecisionContext) -> Option<f64> {
    if q.energy > c.battery {
        return None;
    }
    let e = if c.battery.is_infinite() { 0.0 } else { q.energy / c.battery };
    Some(c.weights.delay * q.delay / c.deadline + c.weights.energy * e + c.weights.price * q.price / c.p_pref)
}

/// Every destination in preference order, local first.
fn enumerate(local: &Quote, remotes: &[Quote], c: &DecisionContext) -> Vec<(Choice, Option<f64>)> {
    std::iter::once((Choice::Local, cost(local, c)))
        .chain(remotes.iter().enumerate().map(|(j, q)| (Choice::Remote(j), cost(q, c))))
        .collect()
}

fn brute_argmin(local: &Quote, remotes: &[Quote], c: &DecisionContext) -> (Choice, bool) {
    let all = enumerate(local, remotes, c);
    let feasible: Vec<_> = all.iter().filter_map(|&(ch, k)| k.map(|k| (ch, k))).collect();
    let Some(min) = feasible.iter().map(|f| f.1).reduce(f64::min) else {
        return (Choice::Local, false);
    };
    (feasible.iter().find(|f| f.1 == min).unwrap().0, true)
}

fn brute_centralized(local: &Quote, remotes: &[Quote], c: &DecisionContext) -> (Choice, bool) {
    let servers: Vec<_> = enumerate(local, remotes, c)
        .into_iter()
        .skip(1)
        .filter_map(|(ch, k)| k.map(|k| (ch, k)))
        .collect();
    let best = servers
        .iter()
        .map(|s| s.1)
        .reduce(f64::min)
        .map(|m| *servers.iter().find(|s| s.1 == m).unwrap());
    match (best, cost(local, c)) {
        (Some((ch, k)), Some(l)) if k <= l => (ch, true),
        (_, Some(_)) => (Choice::Local, true),
        (Some((ch, _)), None) => (ch, true),
        (None, None) => (Choice::Local, false),
    }
}

/// Values on coarse grids so equal costs, and hence tie-breaks, are common.
fn grid_quote(rng: &mut ChaCha8Rng, price: bool) -> Quote {
    Quote {
        delay: f64::from(rng.random_range(0..5u8)) * 0.25,
        energy: f64::from(rng.random_range(0..5u8)) * 0.5,
        price: if price { f64::from(rng.random_range(0..4u8)) * 0.005 } else { 0.0 },
    }
}

fn random_context(rng: &mut ChaCha8Rng) -> DecisionContext {
    let weights = match rng.random_range(0..4) {
        0 => ImportanceWeights::new(0.5, 0.25, 0.25).unwrap(),
        1 => ImportanceWeights::new(1.0, 0.0, 0.0).unwrap(),
        _ => generate_weights(rng),
    };
    DecisionContext {
        weights,
        deadline: 0.5,
        battery: match rng.random_range(0..3) {
            0 => f64::INFINITY,
            1 => 1.0,
            _ => rng.random_range(0.1..3.0),
        },
        p_pref: P_PREF,
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Quote, Vec<Quote>, DecisionContext) {
    let local = grid_quote(rng, false);
    let n = rng.random_range(1..=6);
    let mut remotes: Vec<Quote> = (0..n).map(|_| grid_quote(rng, true)).collect();
    if n > 1 && rng.random_bool(0.3) {
        remotes[n - 1] = remotes[0];
    }
    (local, remotes, random_context(rng))
}

type Decide = fn(&Quote, &[Quote], &DecisionContext) -> OffloadDecision;
type Oracle = fn(&Quote, &[Quote], &DecisionContext) -> (Choice, bool);

fn decision_oracle() -> String {
    let cases: [(&str, Decide, Oracle); 3] = [
        ("decentralized", decide_decentralized, brute_argmin),
        ("hybrid", decide_hybrid, brute_argmin),
        ("centralized", decide_centralized, brute_centralized),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ties = 0;
    for (name, decide, oracle) in cases {
        for i in 0..10_000 {
            let (local, remotes, c) = random_instance(&mut rng);
            let d = decide(&local, &remotes, &c);
            let (choice, feasible) = oracle(&local, &remotes, &c);
            assert_eq!((d.choice, d.feasible), (choice, feasible), "{name} instance {i}");
            let costs: Vec<f64> = enumerate(&local, &remotes, &c).iter().filter_map(|x| x.1).collect();
            if costs.iter().filter(|&&k| k == d.cost).count() > 1 {
                ties += 1;
            }
        }
    }
    format!("3 x 10^4 instances match enumeration, {ties} with tied minimum cost")
}

// ---------------------------------------------------------------- gradient check

/// Entries below 1e-6 are skipped: there, rounding in the loss (about
/// 1e-16 relative, divided by 2h) is a visible share of the difference.
fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .filter(|(a, n)| a.abs().max(n.abs()) > 1e-6)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()))
        .fold(0.0, f64::max)
}

fn net(agent: &mut Agent, critic: bool) -> &mut Mlp<f64> {
    if critic {
        &mut agent.critic
    } else {
        &mut agent.actor
    }
}

fn finite_differences(agent: &mut Agent, critic: bool, loss: &dyn Fn(&Agent) -> f64) -> Vec<f64> {
    let h = 1e-5;
    let n = net(agent, critic).param_count();
    (0..n)
        .map(|k| {
            let orig = *net(agent, critic).params_mut().nth(k).unwrap();
            *net(agent, critic).params_mut().nth(k).unwrap() = orig + h;
            let up = loss(agent);
            *net(agent, critic).params_mut().nth(k).unwrap() = orig - h;
            let down = loss(agent);
            *net(agent, critic).params_mut().nth(k).unwrap() = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn gradient_check() -> String {
    let hp = Hyperparams {
        hidden: 16,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _net in 0..3 {
        let mut agent = Agent::new(&hp, &mut rng);
        agent.actor = Mlp::new(&[2, 16, 16, 1], Activation::Tanh, None, &mut rng);
        agent.target_actor = Mlp::new(&[2, 16, 16, 1], Activation::Tanh, None, &mut rng);
        agent.target_critic = Mlp::new(&[3, 16, 16, 1], Activation::Linear, None, &mut rng);
        for _batch in 0..3 {
            let batch: Vec<Transition<f64>> = (0..16)
                .map(|_| Transition {
                    state: [rng.random_range(0.0..6.0), rng.random_range(0.0..3.0)],
                    action: rng.random_range(-1.0..1.0),
                    reward: rng.random_range(-3.0..3.0),
                    next: [rng.random_range(0.0..6.0), rng.random_range(0.0..3.0)],
                })
                .collect();
            let analytic: Vec<f64> = grads_iter(&agent.critic_loss(&batch, 0.95).1).copied().collect();
            let numeric = finite_differences(&mut agent, true, &|a| a.critic_loss(&batch, 0.95).0);
            worst = worst.max(max_rel_error(&analytic, &numeric));
            let analytic: Vec<f64> = grads_iter(&agent.actor_loss(&batch).1).copied().collect();
            let numeric = finite_differences(&mut agent, false, &|a| a.actor_loss(&batch).0);
            worst = worst.max(max_rel_error(&analytic, &numeric));
        }
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
    format!("3 nets x 3 batches, actor and critic, max relative error {worst:.1e}")
}

// ---------------------------------------------------------------- soft update

fn soft_update_decay() -> String {
    let hp = Hyperparams {
        hidden: 16,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut agent = DdpgAgent::<f64>::new(&hp, &mut rng);
    agent.target_actor = Mlp::new(&[2, 16, 16, 1], Activation::Tanh, None, &mut rng);
    agent.target_critic = Mlp::new(&[3, 16, 16, 1], Activation::Linear, None, &mut rng);
    let tau = hp.tau;
    let (a0, c0) = (
        agent.target_actor.max_abs_diff(&agent.actor),
        agent.target_critic.max_abs_diff(&agent.critic),
    );
    let mut worst: f64 = 0.0;
    for k in 1..=100 {
        agent.soft_update(tau);
        let f = (1.0 - tau).powi(k);
        worst = worst
            .max((agent.target_actor.max_abs_diff(&agent.actor) - a0 * f).abs())
            .max((agent.target_critic.max_abs_diff(&agent.critic) - c0 * f).abs());
    }
    assert!(worst < 1e-9, "deviation {worst:e}");
    format!("100 updates at tau {tau}, max deviation from (1-tau)^k {worst:.1e}")
}

// ---------------------------------------------------------------- samplers

fn samplers() -> String {
    let app = presets::application();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 100_000;
    let mean = (0..n).map(|i| sample_task(i, &app, 0, 0.0, &mut rng).length).sum::<f64>() / n as f64;
    // exponential lengths: standard deviation equals the mean
    let sigma = app.expected_length / (n as f64).sqrt();
    assert!((mean - app.expected_length).abs() < 3.0 * sigma, "length mean {mean}");

    let rate = app.poisson_rate;
    let count = poisson_arrivals(rate, 3600.0, ChaCha8Rng::seed_from_u64(10)).len() as f64;
    assert!((count - rate * 3600.0).abs() < 3.0 * (rate * 3600.0).sqrt(), "count {count}");

    let mut sums = [0.0; 3];
    let mut delays = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let w = generate_weights(&mut rng);
        assert_eq!(w.sum(), 1.0);
        sums[0] += w.delay;
        sums[1] += w.energy;
        sums[2] += w.price;
        delays.push(w.delay);
    }
    for s in sums {
        assert!((s / n as f64 - 1.0 / 3.0).abs() < 0.01);
    }
    // Kolmogorov-Smirnov against Beta(1, 2), CDF 1 - (1 - x)^2
    delays.sort_by(f64::total_cmp);
    let m = delays.len() as f64;
    let ks = delays
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (1.0 - x).powi(2);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 1.628 / m.sqrt(), "KS statistic {ks}");
    format!(
        "length mean {mean:.1}, {count} arrivals in 3600 s, weight means {:.4}/{:.4}/{:.4}, KS {ks:.4}",
        sums[0] / n as f64,
        sums[1] / n as f64,
        sums[2] / n as f64
    )
}

// ---------------------------------------------------------------- conservation

fn conservation() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut total = 0;
    for i in 0..20 {
        let servers = rng.random_range(1..=4);
        let gen = GenParams {
            side: rng.random_range(200.0..600.0),
            server_count: servers,
            cluster_count: rng.random_range(1..=servers),
            twst_weight: rng.random_range(0.0..=1.0),
            extra_edges: rng.random_range(0..4),
            seed: rng.random(),
            ..Default::default()
        };
        let topology = Topology::ALL[rng.random_range(0..3)];
        let devices = rng.random_range(5..40);
        let minutes = rng.random_range(1.0..3.0);
        let inputs = presets::scenario(&gen, devices, minutes, topology).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let pricing = if i % 2 == 0 { Pricing::UniformRandom } else { Pricing::Agents };
        let hp = Hyperparams {
            hidden: 16,
            batch_size: 8,
            ..Default::default()
        };
        let cfg = config("fuzz", inputs, hp, Mode::Train, rng.random(), tmp.path());
        let r = run_episode_with(&cfg, None, pricing).unwrap();

        let mut by_status: HashMap<TaskStatus, usize> = HashMap::new();
        let (mut local, mut edge) = (0, 0);
        for t in &r.tasks {
            let s = TaskStatus::parse(&t.status).unwrap();
            *by_status.entry(s).or_default() += 1;
            if s.is_terminal() {
                if t.destination == "local" {
                    local += 1;
                } else {
                    edge += 1;
                }
            }
        }
        let get = |s| by_status.get(&s).copied().unwrap_or(0);
        let success = get(TaskStatus::DoneSuccess);
        let failed = get(TaskStatus::FailedLatency) + get(TaskStatus::FailedEnergy) + get(TaskStatus::FailedDeviceDead);
        let open = get(TaskStatus::Created) + get(TaskStatus::Queued) + get(TaskStatus::Executing);
        let generated = r.run.tasks_generated as usize;
        assert_eq!(success + failed + open, generated, "config {i}");
        assert_eq!(local + edge, success + failed, "config {i}");
        total += generated;
    }
    format!("20 configs, {total} tasks, every task finished or open at the cutoff")
}

// ---------------------------------------------------------------- envgen

fn kruskal_length(p: &[Location]) -> f64 {
    let n = p.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((p[i].distance(&p[j]), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            x = parent[x];
        }
        x
    }
    let mut total = 0.0;
    for (d, i, j) in pairs {
        let (a, b) = (root(&mut parent, i), root(&mut parent, j));
        if a != b {
            parent[a] = b;
            total += d;
        }
    }
    total
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Location> {
    (0..n)
        .map(|_| Location::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0)))
        .collect()
}

/// Random connected graph: a random tree plus a few extra edges.
fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    for _ in 0..rng.random_range(0..n) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b && !edges.contains(&(a.min(b), a.max(b))) {
            edges.push((a.min(b), a.max(b)));
        }
    }
    edges
}

fn brute_betweenness(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    const INF: usize = usize::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    let mut count = vec![vec![0f64; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in edges {
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    // number of shortest paths by distance layers
    for s in 0..n {
        count[s][s] = 1.0;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&v| d[s][v]);
        for &v in order.iter().skip(1) {
            count[s][v] = edges
                .iter()
                .filter_map(|&(a, b)| if a == v { Some(b) } else if b == v { Some(a) } else { None })
                .filter(|&u| d[s][u] + 1 == d[s][v])
                .map(|u| count[s][u])
                .sum();
        }
    }
    let mut cb = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            for v in 0..n {
                if v != s && v != t && d[s][v] + d[v][t] == d[s][t] {
                    cb[v] += count[s][v] * count[v][t] / count[s][t];
                }
            }
        }
    }
    cb
}

fn brute_average_linkage(dist: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = (0..dist.len()).map(|i| vec![i]).collect();
    let linkage = |a: &[usize], b: &[usize]| {
        a.iter().flat_map(|&i| b.iter().map(move |&j| dist[i][j])).sum::<f64>() / (a.len() * b.len()) as f64
    };
    while clusters.len() > k {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let l = linkage(&clusters[i], &clusters[j]);
                if l < best.0 {
                    best = (l, i, j);
                }
            }
        }
        let moved = clusters.remove(best.2);
        clusters[best.1].extend(moved);
    }
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters.sort();
    clusters
}

fn floyd(p: &[Location], edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let n = p.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(a, b) in edges {
        d[a][b] = p[a].distance(&p[b]);
        d[b][a] = d[a][b];
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn envgen_reductions() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_mst: f64 = 0.0;
    for n in [3, 10, 40, 120] {
        let p = random_points(&mut rng, n);
        let tree = build_twst(&p, 1.0);
        assert_eq!(tree.len(), n - 1);
        let len: f64 = tree.iter().map(|&(a, b)| p[a].distance(&p[b])).sum();
        worst_mst = worst_mst.max((len - kruskal_length(&p)).abs());
    }
    let aps = place_aps(1100.0, 45.0);
    let tree = build_twst(&aps, 1.0);
    let len: f64 = tree.iter().map(|&(a, b)| aps[a].distance(&aps[b])).sum();
    worst_mst = worst_mst.max((len - kruskal_length(&aps)).abs());
    assert!(worst_mst < 1e-9, "MST gap {worst_mst}");

    let mut worst_cb: f64 = 0.0;
    let mut heads = 0;
    for _ in 0..60 {
        let n = rng.random_range(2..=12);
        let p = random_points(&mut rng, n);
        let edges = random_graph(&mut rng, n);
        let adj = {
            let mut adj = vec![Vec::new(); n];
            for &(a, b) in &edges {
                adj[a].push(b);
                adj[b].push(a);
            }
            adj
        };
        let cb = betweenness(&adj);
        let oracle = brute_betweenness(n, &edges);
        for (a, b) in cb.iter().zip(&oracle) {
            worst_cb = worst_cb.max((a - b).abs());
        }

        let mut hosts: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            hosts.swap(i, rng.random_range(0..=i));
        }
        hosts.truncate(rng.random_range(1..=n));
        let k = rng.random_range(1..=hosts.len());
        let all = floyd(&p, &edges);
        let dist: Vec<Vec<f64>> = hosts.iter().map(|&a| hosts.iter().map(|&b| all[a][b]).collect()).collect();
        let expect = brute_average_linkage(&dist, k);
        let mut got = average_linkage(&dist, k);
        got.sort();
        assert_eq!(got, expect);

        let assignment = cluster_servers(&p, &edges, &hosts, k).unwrap();
        for members in &expect {
            let c = assignment.cluster_of[members[0]];
            assert!(members.iter().all(|&m| assignment.cluster_of[m] == c));
            let best = members.iter().map(|&m| oracle[hosts[m]]).fold(f64::NEG_INFINITY, f64::max);
            let head = *members.iter().find(|&&m| (oracle[hosts[m]] - best).abs() < 1e-9).unwrap();
            assert_eq!(assignment.head_of(c), head);
            heads += 1;
        }
    }
    assert!(worst_cb < 1e-12, "betweenness gap {worst_cb}");
    format!(
        "MST gap {worst_mst:.1e}; 60 graphs of at most 12 vertices, betweenness gap {worst_cb:.1e}, {heads} heads match"
    )
}

// ---------------------------------------------------------------- price monotonicity

fn price_monotonicity() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let deciders: [Decide; 3] = [decide_decentralized, decide_hybrid, decide_centralized];
    let mut instances = 0;
    let mut probes = 0;
    while instances < 1000 {
        let (local, mut remotes, c) = random_instance(&mut rng);
        if c.weights.price <= 0.0 {
            continue;
        }
        instances += 1;
        for j in 0..remotes.len() {
            for decide in deciders {
                let before = decide(&local, &remotes, &c).choice;
                let old = remotes[j].price;
                remotes[j].price += rng.random_range(1e-6..0.02);
                let after = decide(&local, &remotes, &c).choice;
                remotes[j].price = old;
                if before != Choice::Remote(j) {
                    assert_ne!(after, Choice::Remote(j));
                }
                probes += 1;
            }
        }
    }
    format!("{instances} instances, {probes} price raises, none attracted the task")
}

// ---------------------------------------------------------------- learning smoke test

fn learning_smoke() -> String {
    let tmp = tempfile::tempdir().unwrap();
    let folders = Folders {
        input: scenario_dir("smoke"),
        output: tmp.path().join("out"),
        models: tmp.path().join("models"),
    };
    let hyper = Hyperparams {
        reward_scale: 1e-4,
        ..Default::default()
    };
    let c = Campaign::load(folders, hyper, 1, None).unwrap();
    assert_eq!(c.inputs.params.device_count, 20);
    assert_eq!(c.inputs.datacenters.datacenters.iter().filter(|d| d.spec.is_some()).count(), 1);
    c.train(20, 0).unwrap();
    let mean = |s: Vec<edgesim::io::summary::RunSummary>| s.iter().map(|s| s.total_return).sum::<f64>() / s.len() as f64;
    let trained = mean(c.evaluate(5).unwrap());
    let random = mean(c.evaluate_with(5, Pricing::UniformRandom, "random").unwrap());
    assert!(trained >= random, "trained {trained:.1} < random {random:.1}");
    format!("mean evaluation return trained {trained:.1} vs uniform random {random:.1}")
}

// ---------------------------------------------------------------- harness

type Criterion = (&'static str, fn() -> String);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 12] = [
        ("determinism", determinism),
        ("slot count", slot_count),
        ("AP placement", ap_placement),
        ("reward oracle", reward_oracle),
        ("decision oracle", decision_oracle),
        ("gradient check", gradient_check),
        ("soft-update decay", soft_update_decay),
        ("samplers", samplers),
        ("conservation", conservation),
        ("envgen reductions", envgen_reductions),
        ("price monotonicity", price_monotonicity),
        ("learning smoke test", learning_smoke),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let start = Instant::now();
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(detail) => println!("PASS  {name}: {detail} ({:.1} s)", start.elapsed().as_secs_f64()),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| (*s).to_owned()))
                    .unwrap_or_default();
                println!("FAIL  {name}: {msg}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
