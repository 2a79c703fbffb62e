//! DDPG pricing agents.

mod ddpg;
mod mlp;
mod noise;
mod replay;
mod reward;

pub use ddpg::{model_path, Action, DdpgAgent, Mode};
pub use mlp::{grads_iter, Activation, Adam, Grads, Layer, Mlp, Trace};
pub use noise::OuNoise;
pub use replay::{ReplayBuffer, Transition, STATE_DIM};
pub use reward::{reward_decentralized, reward_hybrid};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training hyperparameters shared by every agent of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub updates_per_slot: usize,
    pub noise_theta: f64,
    pub noise_sigma: f64,
    pub random_steps: u64,
    pub random_episodes: u64,
    /// Cost per joule in the reward.
    pub zeta: f64,
    /// Pricing slot length, seconds.
    pub slot_length: f64,
    pub hidden: usize,
    /// Multiplies state features before they reach the networks.
    pub state_scale: f64,
    /// Multiplies rewards stored in the replay (logged rewards are unscaled).
    pub reward_scale: f64,
    /// Actor gradient norm cap; 0 disables.
    pub grad_clip: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            replay_capacity: 100_000,
            batch_size: 64,
            gamma: 0.95,
            actor_lr: 5e-4,
            critic_lr: 5e-4,
            tau: 0.005,
            updates_per_slot: 1,
            noise_theta: 0.15,
            noise_sigma: 0.2,
            random_steps: 500,
            random_episodes: 4,
            zeta: 1e-5,
            slot_length: 5.0,
            hidden: 64,
            state_scale: 1.0,
            reward_scale: 1.0,
            grad_clip: 0.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Param(m.to_owned()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must be in (0, 1]");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be > 0");
        }
        if !(self.slot_length > 0.0) {
            return bad("slot length must be > 0");
        }
        if self.replay_capacity == 0 || self.batch_size == 0 || self.hidden == 0 {
            return bad("replay capacity, batch size and hidden width must be > 0");
        }
        if !(self.noise_theta >= 0.0 && self.noise_sigma >= 0.0 && self.zeta >= 0.0) {
            return bad("noise parameters and zeta must be >= 0");
        }
        if !(self.state_scale > 0.0 && self.reward_scale > 0.0 && self.grad_clip >= 0.0) {
            return bad("state/reward scales must be > 0 and grad clip >= 0");
        }
        Ok(())
    }
}
