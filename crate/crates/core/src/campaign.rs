//! Multi-episode campaigns: hyperparameter tuning, training and evaluation.
//!
//! Layout below the output folder, for scenario `s`:
//!
//! ```text
//! s/train/episode_000/...          s/train/summaries.csv, aggregate.csv
//! s/train/progress_020.csv         summaries of the first 20 episodes
//! s/evaluate/episode_000/...       s/evaluate/summaries.csv, aggregate.csv
//! s/tune/<combo>/{train,evaluate}/episode_000/...
//! s/tune/tune.csv                  evaluation return per combination
//! ```
//!
//! Models live in `<models>/s/<agent>/state.json`; training snapshots in
//! `<models>/s.snapshots/episode_020/<agent>/state.json`; tuning models in
//! `<models>/tune/<combo>/s/<agent>/state.json`.

use std::path::{Path, PathBuf};

use crate::agents::{Hyperparams, Mode};
use crate::error::{Error, Result};
use crate::io::config::{parse_inputs, scenario_name, Folders, Inputs, ScenarioConfig};
use crate::io::logs::write_rows;
use crate::io::properties::Topology;
use crate::io::summary::{aggregate, aggregate_rows, summarize_dir, RunSummary};
use crate::seed::derive_seed;
use crate::sim::{run_episode_with, Pricing};

/// Evaluation episodes draw their seeds from this index onwards so they
/// never share a seed with a training episode.
pub const EVAL_SEED_OFFSET: u64 = 1_000_000;

pub const TUNE_LEARNING_RATES: [f64; 3] = [5e-4, 1e-3, 5e-3];

pub fn episode_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, "episode", index)
}

/// Model and log name of a scenario: the input folder name plus the
/// topology, since agent ids are only unique within one topology.
pub fn scenario_label(folder: &Path, topology: Topology) -> String {
    format!("{}-{}", scenario_name(folder), topology.token().to_ascii_lowercase())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub name: String,
    pub inputs: Inputs,
    pub hyper: Hyperparams,
    pub seed: u64,
    pub folders: Folders,
}

impl Campaign {
    /// Parses the input folder; `topology` overrides the properties file.
    pub fn load(folders: Folders, hyper: Hyperparams, seed: u64, topology: Option<Topology>) -> Result<Self> {
        hyper.validate()?;
        let mut inputs = parse_inputs(&folders.input)?;
        if let Some(t) = topology {
            inputs.params.topology = t;
        }
        Ok(Self {
            name: scenario_label(&folders.input, inputs.params.topology),
            inputs,
            hyper,
            seed,
            folders,
        })
    }

    pub fn config(&self, mode: Mode, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            name: self.name.clone(),
            inputs: self.inputs.clone(),
            hyper: self.hyper.clone(),
            mode,
            seed,
            folders: self.folders.clone(),
        }
    }

    pub fn root(&self) -> PathBuf {
        self.folders.output.join(&self.name)
    }

    fn run(&self, mode: Mode, seed: u64, dir: &Path, pricing: Pricing) -> Result<RunSummary> {
        let cfg = self.config(mode, seed);
        run_episode_with(&cfg, Some(dir), pricing)?;
        summarize_dir(dir).map_err(|e| Error::Scenario {
            scenario: self.name.clone(),
            source: Box::new(e),
        })
    }

    /// `episodes` training episodes; every `snapshot_every` episodes the
    /// models and the summaries so far are copied aside.
    pub fn train(&self, episodes: u64, snapshot_every: u64) -> Result<Vec<RunSummary>> {
        let dir = self.root().join("train");
        let mut out = Vec::new();
        for i in 0..episodes {
            log::info!("{}: training episode {}/{episodes}", self.name, i + 1);
            let ep = dir.join(format!("episode_{i:03}"));
            out.push(self.run(Mode::Train, episode_seed(self.seed, i), &ep, Pricing::Agents)?);
            let done = i + 1;
            if snapshot_every > 0 && done % snapshot_every == 0 {
                write_rows(&dir.join(format!("progress_{done:03}.csv")), &out)?;
                self.snapshot_models(done)?;
            }
        }
        write_group(&dir, "train", &out)?;
        Ok(out)
    }

    fn snapshot_models(&self, episode: u64) -> Result<()> {
        let src = self.folders.models.join(&self.name);
        let dst = self
            .folders
            .models
            .join(format!("{}.snapshots", self.name))
            .join(format!("episode_{episode:03}"));
        copy_tree(&src, &dst)
    }

    /// `episodes` evaluation episodes with the trained models.
    pub fn evaluate(&self, episodes: u64) -> Result<Vec<RunSummary>> {
        self.evaluate_with(episodes, Pricing::Agents, "evaluate")
    }

    /// Evaluation under another pricing policy, logged under `subdir`.
    pub fn evaluate_with(&self, episodes: u64, pricing: Pricing, subdir: &str) -> Result<Vec<RunSummary>> {
        let dir = self.root().join(subdir);
        let mut out = Vec::new();
        for i in 0..episodes {
            log::info!("{}: evaluation episode {}/{episodes}", self.name, i + 1);
            let ep = dir.join(format!("episode_{i:03}"));
            let seed = episode_seed(self.seed, EVAL_SEED_OFFSET + i);
            out.push(self.run(Mode::Evaluate, seed, &ep, pricing)?);
        }
        write_group(&dir, subdir, &out)?;
        Ok(out)
    }

    /// Grid over actor and critic learning rates; each combination trains
    /// from scratch and is then evaluated.
    pub fn tune(&self, train_episodes: u64, eval_episodes: u64) -> Result<Vec<TuneRow>> {
        let root = self.root().join("tune");
        let mut rows = Vec::new();
        for &actor_lr in &TUNE_LEARNING_RATES {
            for &critic_lr in &TUNE_LEARNING_RATES {
                let combo = format!("actor_{actor_lr:e}_critic_{critic_lr:e}");
                let models = self.folders.models.join("tune").join(&combo);
                let stale = models.join(&self.name);
                if stale.exists() {
                    std::fs::remove_dir_all(&stale).map_err(|e| Error::io(&stale, e))?;
                }
                let sub = Campaign {
                    hyper: Hyperparams {
                        actor_lr,
                        critic_lr,
                        ..self.hyper.clone()
                    },
                    folders: Folders {
                        models,
                        ..self.folders.clone()
                    },
                    ..self.clone()
                };
                let train_dir = root.join(&combo).join("train");
                let eval_dir = root.join(&combo).join("evaluate");
                let mut trained = Vec::new();
                for i in 0..train_episodes {
                    let ep = train_dir.join(format!("episode_{i:03}"));
                    trained.push(sub.run(Mode::Train, episode_seed(self.seed, i), &ep, Pricing::Agents)?);
                }
                write_group(&train_dir, "train", &trained)?;
                let mut evals = Vec::new();
                for i in 0..eval_episodes {
                    let ep = eval_dir.join(format!("episode_{i:03}"));
                    let seed = episode_seed(self.seed, EVAL_SEED_OFFSET + i);
                    evals.push(sub.run(Mode::Evaluate, seed, &ep, Pricing::Agents)?);
                }
                write_group(&eval_dir, "evaluate", &evals)?;
                let returns: Vec<f64> = evals.iter().map(|s| s.total_return).collect();
                let a = if returns.is_empty() { None } else { Some(aggregate(&returns)) };
                log::info!("{}: {combo} mean evaluation return {:?}", self.name, a.map(|a| a.mean));
                rows.push(TuneRow {
                    scenario: self.name.clone(),
                    combination: combo,
                    actor_lr,
                    critic_lr,
                    n: returns.len(),
                    mean_return: a.map_or(f64::NAN, |a| a.mean),
                    ci95_half_width: a.map_or(f64::NAN, |a| a.half_width),
                });
            }
        }
        write_rows(&root.join("tune.csv"), &rows)?;
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TuneRow {
    pub scenario: String,
    pub combination: String,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub n: usize,
    pub mean_return: f64,
    pub ci95_half_width: f64,
}

/// Writes `summaries.csv` and `aggregate.csv` for one group of episodes;
/// `group` is the folder name, so `summarize` rebuilds the same files.
pub fn write_group(dir: &Path, group: &str, summaries: &[RunSummary]) -> Result<()> {
    write_rows(&dir.join("summaries.csv"), summaries)?;
    write_rows(&dir.join("aggregate.csv"), &aggregate_rows(group, summaries))
}

fn copy_tree(src: &Path, dst: &Path) -> Result<()> {
    std::fs::create_dir_all(dst).map_err(|e| Error::io(dst, e))?;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(src)
        .map_err(|e| Error::io(src, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        let to = dst.join(p.file_name().unwrap());
        if p.is_dir() {
            copy_tree(&p, &to)?;
        } else {
            std::fs::copy(&p, &to).map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok(())
}
