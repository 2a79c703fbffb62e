use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{scale_grads, Activation, Adam, Grads, Mlp};
use super::noise::OuNoise;
use super::replay::{ReplayBuffer, Transition, STATE_DIM};
use super::Hyperparams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const FORMAT: &str = "edgesim-ddpg-agent";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Evaluate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action<S> {
    /// Price per MI in [0, 1].
    pub price: S,
    /// The same action in actor space, `2 * price - 1`.
    pub raw: S,
    pub random: bool,
}

/// DDPG pricing agent: actor, critic, their targets, replay and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct DdpgAgent<S> {
    pub actor: Mlp<S>,
    pub critic: Mlp<S>,
    pub target_actor: Mlp<S>,
    pub target_critic: Mlp<S>,
    actor_opt: Adam<S>,
    critic_opt: Adam<S>,
    pub replay: ReplayBuffer<S>,
    pub noise: OuNoise<S>,
    /// Actions taken over all training episodes.
    pub steps: u64,
    /// Completed training episodes.
    pub episodes: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct StateFile<S> {
    format: String,
    version: u32,
    scalar: String,
    agent: DdpgAgent<S>,
}

/// `<models>/<scenario>/<agent>/state.json`
pub fn model_path(models: &Path, scenario: &str, agent: &str) -> PathBuf {
    models.join(scenario).join(agent).join("state.json")
}

impl<S: Scalar> DdpgAgent<S> {
    pub fn new<R: Rng + ?Sized>(hp: &Hyperparams, rng: &mut R) -> Self {
        let h = hp.hidden;
        let actor = Mlp::new(&[STATE_DIM, h, h, 1], Activation::Tanh, Some(3e-3), rng);
        let critic = Mlp::new(&[STATE_DIM + 1, h, h, 1], Activation::Linear, None, rng);
        Self {
            actor_opt: Adam::new(actor.param_count(), hp.actor_lr),
            critic_opt: Adam::new(critic.param_count(), hp.critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            replay: ReplayBuffer::new(hp.replay_capacity),
            noise: OuNoise::new(hp.noise_theta, hp.noise_sigma),
            steps: 0,
            episodes: 0,
        }
    }

    /// Applies learning rates and noise parameters from `hp` (they may differ
    /// from the values the state was saved with).
    pub fn configure(&mut self, hp: &Hyperparams) {
        self.actor_opt.lr = S::of(hp.actor_lr);
        self.critic_opt.lr = S::of(hp.critic_lr);
        self.noise.theta = S::of(hp.noise_theta);
        self.noise.sigma = S::of(hp.noise_sigma);
    }

    fn scaled(state: [S; STATE_DIM], hp: &Hyperparams) -> [S; STATE_DIM] {
        let k = S::of(hp.state_scale);
        state.map(|x| x * k)
    }

    /// Deterministic actor output in [-1, 1].
    pub fn policy(&self, state: [S; STATE_DIM], hp: &Hyperparams) -> S {
        self.actor.forward(&Self::scaled(state, hp))[0]
    }

    /// Chooses the price for slot `step` of the current episode.
    ///
    /// In training, the first `random_steps` slots of each of the first
    /// `random_episodes` episodes, and the first slot of every later episode,
    /// draw the price uniformly. Other training slots add exploration noise
    /// to the policy price and clip to [0, 1].
    pub fn act<R: Rng + ?Sized>(
        &mut self,
        state: [S; STATE_DIM],
        mode: Mode,
        step: u64,
        hp: &Hyperparams,
        rng: &mut R,
    ) -> Action<S> {
        let two = S::of(2.0);
        let half = S::of(0.5);
        let (price, random) = match mode {
            Mode::Evaluate => ((self.policy(state, hp) + S::one()) * half, false),
            Mode::Train => {
                self.steps += 1;
                let random_window = if self.episodes < hp.random_episodes { hp.random_steps } else { 1 };
                if step < random_window {
                    (S::of(rng.random::<f64>()), true)
                } else {
                    let p = (self.policy(state, hp) + S::one()) * half + self.noise.sample(rng);
                    (p.max(S::zero()).min(S::one()), false)
                }
            }
        };
        Action {
            price,
            raw: price * two - S::one(),
            random,
        }
    }

    pub fn remember(&mut self, state: [S; STATE_DIM], action: S, reward: S, next: [S; STATE_DIM], hp: &Hyperparams) {
        self.replay.push(Transition {
            state: Self::scaled(state, hp),
            action,
            reward: reward * S::of(hp.reward_scale),
            next: Self::scaled(next, hp),
        });
    }

    /// Mean squared TD error on `batch` and its gradient for the critic.
    pub fn critic_loss(&self, batch: &[Transition<S>], gamma: S) -> (S, Grads<S>) {
        let b = S::of(batch.len() as f64);
        let mut grads = self.critic.zero_grads();
        let mut loss = S::zero();
        for t in batch {
            let a2 = self.target_actor.forward(&t.next)[0];
            let q2 = self.target_critic.forward(&[t.next[0], t.next[1], a2])[0];
            let y = t.reward + gamma * q2;
            let trace = self.critic.forward_trace(&[t.state[0], t.state[1], t.action]);
            let err = trace.output()[0] - y;
            loss += err * err / b;
            self.critic.backward(&trace, &[S::of(2.0) * err / b], &mut grads);
        }
        (loss, grads)
    }

    /// Negated mean critic value of the policy on `batch` and its gradient
    /// for the actor.
    pub fn actor_loss(&self, batch: &[Transition<S>]) -> (S, Grads<S>) {
        let b = S::of(batch.len() as f64);
        let mut grads = self.actor.zero_grads();
        let mut critic_scratch = self.critic.zero_grads();
        let mut loss = S::zero();
        for t in batch {
            let at = self.actor.forward_trace(&t.state);
            let a = at.output()[0];
            let ct = self.critic.forward_trace(&[t.state[0], t.state[1], a]);
            loss -= ct.output()[0] / b;
            let dq = self.critic.backward(&ct, &[S::one()], &mut critic_scratch);
            self.actor.backward(&at, &[-dq[STATE_DIM] / b], &mut grads);
        }
        (loss, grads)
    }

    /// One DDPG step; `false` if the replay holds fewer than a batch.
    pub fn update<R: Rng + ?Sized>(&mut self, hp: &Hyperparams, rng: &mut R) -> bool {
        let Some(batch) = self.replay.sample(hp.batch_size, rng) else {
            return false;
        };
        let gamma = S::of(hp.gamma);
        let (_, cg) = self.critic_loss(&batch, gamma);
        self.critic_opt.step(&mut self.critic, &cg);
        let (_, mut ag) = self.actor_loss(&batch);
        if hp.grad_clip > 0.0 {
            let norm = super::mlp::grads_iter(&ag).fold(S::zero(), |s, &g| s + g * g).sqrt();
            let clip = S::of(hp.grad_clip);
            if norm > clip {
                scale_grads(&mut ag, clip / norm);
            }
        }
        self.actor_opt.step(&mut self.actor, &ag);
        self.soft_update(S::of(hp.tau));
        true
    }

    pub fn soft_update(&mut self, tau: S) {
        self.target_actor.soft_update_from(&self.actor, tau);
        self.target_critic.soft_update_from(&self.critic, tau);
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = StateFile {
            format: FORMAT.into(),
            version: VERSION,
            scalar: S::NAME.into(),
            agent: self.clone(),
        };
        let text = serde_json::to_string(&file).expect("agent state serialises");
        crate::io::xml::write_file(path, &text)
    }

    pub fn load(path: &Path, agent: &str) -> Result<Self> {
        let corrupt = |reason: String| Error::CorruptModel {
            agent: agent.to_owned(),
            path: path.to_path_buf(),
            reason,
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingModel {
                    agent: agent.to_owned(),
                    path: path.to_path_buf(),
                })
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        let header: serde_json::Value = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if header.get("format").and_then(|v| v.as_str()) != Some(FORMAT) {
            return Err(corrupt("not an agent state file".into()));
        }
        if header.get("version").and_then(serde_json::Value::as_u64) != Some(u64::from(VERSION)) {
            return Err(corrupt(format!("unsupported version (expected {VERSION})")));
        }
        if header.get("scalar").and_then(|v| v.as_str()) != Some(S::NAME) {
            return Err(corrupt(format!("saved with a different scalar type (expected {})", S::NAME)));
        }
        let file: StateFile<S> = serde_json::from_value(header).map_err(|e| corrupt(e.to_string()))?;
        Ok(file.agent)
    }
}
