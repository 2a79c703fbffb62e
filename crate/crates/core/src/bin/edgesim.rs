use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use edgesim::agents::{Hyperparams, Mode};
use edgesim::campaign::{Campaign, EVAL_SEED_OFFSET};
use edgesim::envgen::{emit_datacenters_file, GenParams, LinkWeights};
use edgesim::io::config::{write_inputs, Folders};
use edgesim::io::properties::Topology;
use edgesim::io::summary::{find_runs, summarize_dir};
use edgesim::model::ServerSpec;
use edgesim::sim::{run_episode_with, Pricing};
use edgesim::{campaign, presets, Result};

#[derive(Parser)]
#[command(name = "edgesim", version, about = "Edge task offloading simulator with DDPG pricing agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode (evaluation mode unless --train is given).
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Train the agents during the episode and save them afterwards.
        #[arg(long)]
        train: bool,
        /// Price uniformly at random instead of using agents.
        #[arg(long)]
        random_pricing: bool,
    },
    /// Generate a MAN topology (and optionally a full scenario folder).
    Envgen(EnvgenArgs),
    /// Learning-rate grid search: 3x3 combinations, train then evaluate each.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        train_episodes: u64,
        #[arg(long, default_value_t = 5)]
        eval_episodes: u64,
    },
    /// Train the agents over many episodes.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        episodes: u64,
        /// Copy models and progress every this many episodes (0 disables).
        #[arg(long, default_value_t = 20)]
        snapshot_every: u64,
    },
    /// Evaluate trained agents.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        episodes: u64,
        #[arg(long)]
        random_pricing: bool,
        /// Use this price in every slot instead of the agents.
        #[arg(long, conflicts_with = "random_pricing")]
        fixed_price: Option<f64>,
    },
    /// Recompute run summaries and aggregates from existing logs.
    Summarize {
        /// An episode directory or any folder above episode directories.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario folder with the five input files.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "models")]
    models: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides orchestration_algorithms from the properties file.
    #[arg(long, value_parser = parse_topology)]
    topology: Option<Topology>,
    #[command(flatten)]
    hyper: HyperArgs,
}

fn parse_topology(s: &str) -> std::result::Result<Topology, String> {
    Topology::parse(s).ok_or_else(|| format!("unknown topology '{s}' (centralized, hybrid or decentralized)"))
}

#[derive(Args)]
struct HyperArgs {
    #[arg(long)]
    replay_capacity: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    actor_lr: Option<f64>,
    #[arg(long)]
    critic_lr: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    updates_per_slot: Option<usize>,
    #[arg(long)]
    noise_theta: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    random_steps: Option<u64>,
    #[arg(long)]
    random_episodes: Option<u64>,
    /// Energy cost per joule in the reward.
    #[arg(long)]
    zeta: Option<f64>,
    /// Pricing slot length in seconds.
    #[arg(long)]
    slot_length: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Multiplier applied to the state before it reaches the networks.
    #[arg(long)]
    state_scale: Option<f64>,
    /// Multiplier applied to rewards stored in the replay buffer.
    #[arg(long)]
    reward_scale: Option<f64>,
    /// Actor gradient norm limit (0 disables).
    #[arg(long)]
    grad_clip: Option<f64>,
}

impl HyperArgs {
    fn resolve(&self) -> Hyperparams {
        let d = Hyperparams::default();
        Hyperparams {
            replay_capacity: self.replay_capacity.unwrap_or(d.replay_capacity),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            gamma: self.gamma.unwrap_or(d.gamma),
            actor_lr: self.actor_lr.unwrap_or(d.actor_lr),
            critic_lr: self.critic_lr.unwrap_or(d.critic_lr),
            tau: self.tau.unwrap_or(d.tau),
            updates_per_slot: self.updates_per_slot.unwrap_or(d.updates_per_slot),
            noise_theta: self.noise_theta.unwrap_or(d.noise_theta),
            noise_sigma: self.noise_sigma.unwrap_or(d.noise_sigma),
            random_steps: self.random_steps.unwrap_or(d.random_steps),
            random_episodes: self.random_episodes.unwrap_or(d.random_episodes),
            zeta: self.zeta.unwrap_or(d.zeta),
            slot_length: self.slot_length.unwrap_or(d.slot_length),
            hidden: self.hidden.unwrap_or(d.hidden),
            state_scale: self.state_scale.unwrap_or(d.state_scale),
            reward_scale: self.reward_scale.unwrap_or(d.reward_scale),
            grad_clip: self.grad_clip.unwrap_or(d.grad_clip),
        }
    }
}

#[derive(Args)]
struct EnvgenArgs {
    /// Side of the square area, meters.
    #[arg(long, default_value_t = 1100.0)]
    side: f64,
    /// Access point coverage radius, meters.
    #[arg(long, default_value_t = 45.0)]
    coverage: f64,
    #[arg(long, default_value_t = 20)]
    servers: usize,
    #[arg(long, default_value_t = 8)]
    clusters: usize,
    /// Spanning tree weight: 1 favors short links, 0 favors hubs.
    #[arg(long, default_value_t = 0.5)]
    twst_weight: f64,
    #[arg(long, default_value_t = 0)]
    extra_edges: usize,
    /// Extra-link weight of the distance term.
    #[arg(long, default_value_t = 1.0)]
    w1: f64,
    /// Extra-link weight of the preferential-attachment term.
    #[arg(long, default_value_t = 1.0)]
    w2: f64,
    /// Extra-link weight of the uniform term.
    #[arg(long, default_value_t = 1.0)]
    w3: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output folder.
    #[arg(long)]
    out: PathBuf,
    /// Server hardware: high (15 x 20000 MIPS) or low (6 x 10000 MIPS).
    #[arg(long, default_value = "high")]
    server_type: String,
    /// Also write the device, application, cloud and properties files.
    #[arg(long)]
    with_defaults: bool,
    #[arg(long, default_value_t = 1000)]
    devices: usize,
    /// Simulation time in minutes.
    #[arg(long, default_value_t = 60.0)]
    minutes: f64,
    #[arg(long, value_parser = parse_topology, default_value = "decentralized")]
    topology: Topology,
}

fn folders(c: &Common) -> Folders {
    Folders {
        input: c.input.clone(),
        output: c.output.clone(),
        models: c.models.clone(),
    }
}

fn load(c: &Common) -> Result<Campaign> {
    Campaign::load(folders(c), c.hyper.resolve(), c.seed, c.topology)
}

fn envgen(a: &EnvgenArgs) -> Result<()> {
    let server_spec = match a.server_type.as_str() {
        "high" => ServerSpec::HIGH_CAPACITY,
        "low" => ServerSpec::LOW_CAPACITY,
        other => return Err(edgesim::Error::Param(format!("unknown server type '{other}' (high or low)"))),
    };
    let gen = GenParams {
        side: a.side,
        coverage: a.coverage,
        twst_weight: a.twst_weight,
        link_weights: LinkWeights {
            distance: a.w1,
            preferential: a.w2,
            uniform: a.w3,
        },
        extra_edges: a.extra_edges,
        server_count: a.servers,
        cluster_count: a.clusters,
        seed: a.seed,
        server_spec,
        ..Default::default()
    };
    if a.with_defaults {
        let inputs = presets::scenario(&gen, a.devices, a.minutes, a.topology)?;
        write_inputs(&a.out, &inputs)?;
    } else {
        emit_datacenters_file(&gen, &a.out.join(edgesim::io::xml::DATACENTERS_FILE))?;
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn summarize(input: &Path) -> Result<()> {
    let runs = find_runs(input)?;
    let mut groups: BTreeMap<PathBuf, Vec<_>> = BTreeMap::new();
    for r in &runs {
        let s = summarize_dir(r)?;
        groups.entry(r.parent().unwrap_or(input).to_path_buf()).or_default().push(s);
    }
    for (dir, summaries) in &groups {
        if runs.len() > 1 {
            let name = dir.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            campaign::write_group(dir, &name, summaries)?;
        }
    }
    println!("summarized {} runs", runs.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            common,
            train,
            random_pricing,
        } => {
            let c = load(&common)?;
            let mode = if train { Mode::Train } else { Mode::Evaluate };
            let pricing = if random_pricing { Pricing::UniformRandom } else { Pricing::Agents };
            let cfg = c.config(mode, common.seed);
            let r = run_episode_with(&cfg, Some(&common.output), pricing)?;
            let s = summarize_dir(&common.output)?;
            println!(
                "{}: {} tasks, {:.1}% offloaded, return {:.6}",
                c.name, s.tasks_generated, s.offloaded_pct, r.total_return()
            );
        }
        Command::Envgen(a) => envgen(&a)?,
        Command::Tune {
            common,
            train_episodes,
            eval_episodes,
        } => {
            for row in load(&common)?.tune(train_episodes, eval_episodes)? {
                println!("{}: mean return {:.6} ± {:.6}", row.combination, row.mean_return, row.ci95_half_width);
            }
        }
        Command::Train {
            common,
            episodes,
            snapshot_every,
        } => {
            let s = load(&common)?.train(episodes, snapshot_every)?;
            if let Some(last) = s.last() {
                println!("trained {episodes} episodes; last return {:.6}", last.total_return);
            }
        }
        Command::Evaluate {
            common,
            episodes,
            random_pricing,
            fixed_price,
        } => {
            let c = load(&common)?;
            let s = if random_pricing {
                c.evaluate_with(episodes, Pricing::UniformRandom, "random")?
            } else if let Some(p) = fixed_price {
                if !(0.0..=1.0).contains(&p) {
                    return Err(edgesim::Error::Param("--fixed-price must be in [0, 1]".into()));
                }
                c.evaluate_with(episodes, Pricing::Fixed(p), &format!("fixed_{p}"))?
            } else {
                c.evaluate(episodes)?
            };
            let mean = s.iter().map(|s| s.total_return).sum::<f64>() / s.len().max(1) as f64;
            println!("evaluated {episodes} episodes (seeds from index {EVAL_SEED_OFFSET}); mean return {mean:.6}");
        }
        Command::Summarize { input } => summarize(&input)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
