//! Reference-trajectory planning between hover points.
//!
//! Each flight is split into an acceleration half and its mirror image. The
//! acceleration half is a one-dimensional MDP over remaining distance and
//! speed with eleven integer accelerations, solved by a DQN trained from
//! scratch (or, for verification and as a fallback, by value iteration).

mod assemble;
mod dqn;
mod env;
mod network;
mod replay;

use serde::{Deserialize, Serialize};

pub use assemble::{
    assemble_segment, half_profile, HalfPolicy, HalfProfile, ReferenceTrajectory, DEFAULT_ROLLOUT_BUDGET,
};
pub use dqn::{greedy_rollout, train_dqn, TrainingLog, TrainingRecord};
pub use env::{env_step, step_energy, StepOutcome, ACTIONS};
pub use network::{Gradients, QNetwork, Transition};
pub use replay::ReplayBuffer;

pub use crate::validation::value_iteration::{plan_oracle, OracleGrid, OraclePlan, ValueTable};

use crate::scenario::Violation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerState {
    /// Remaining distance to the midpoint, m.
    pub d: f64,
    /// Speed, m/s.
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// DQN training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    /// Start distances trained in sequence, longest first.
    pub training_distances: Vec<f64>,
    pub episodes_per_distance: usize,
    pub hidden: usize,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of all episodes over which ε anneals linearly.
    pub epsilon_decay_fraction: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Hard target-network copy every this many gradient steps.
    pub target_update: usize,
    pub dest_reward: f64,
    /// Rewards are divided by this before entering the network.
    pub reward_scale: f64,
    pub max_episode_steps: usize,
    /// Distance normalizing the network input; larger distances saturate.
    pub d_max: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            training_distances: vec![250.0, 200.0, 150.0, 100.0],
            episodes_per_distance: 150,
            hidden: 64,
            discount: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            batch_size: 64,
            buffer_capacity: 100_000,
            learning_rate: 1e-3,
            optimizer: Optimizer::Sgd,
            target_update: 50,
            dest_reward: 30_000.0,
            reward_scale: 1000.0,
            max_episode_steps: 1000,
            d_max: 250.0,
        }
    }
}

impl DqnConfig {
    pub fn total_episodes(&self) -> usize {
        self.training_distances.len() * self.episodes_per_distance
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut bad = |field: &str, msg: &str| {
            v.push(Violation {
                field: format!("dqn.{field}"),
                message: msg.to_string(),
            })
        };
        if self.training_distances.is_empty()
            || self.training_distances.iter().any(|d| !(*d > 0.0 && d.is_finite()))
        {
            bad("training_distances", "must be a non-empty list of positive distances");
        }
        if self.hidden == 0 {
            bad("hidden", "must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            bad("discount", "must lie in [0, 1]");
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&e) {
                bad(name, "must lie in [0, 1]");
            }
        }
        if !(self.epsilon_decay_fraction > 0.0 && self.epsilon_decay_fraction <= 1.0) {
            bad("epsilon_decay_fraction", "must lie in (0, 1]");
        }
        if self.batch_size == 0 {
            bad("batch_size", "must be >= 1");
        }
        if self.buffer_capacity < self.batch_size {
            bad("buffer_capacity", "must hold at least one minibatch");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            bad("learning_rate", "must be positive");
        }
        if self.target_update == 0 {
            bad("target_update", "must be >= 1");
        }
        if !(self.dest_reward >= 0.0 && self.dest_reward.is_finite()) {
            bad("dest_reward", "must be >= 0");
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            bad("reward_scale", "must be positive");
        }
        if self.max_episode_steps == 0 {
            bad("max_episode_steps", "must be >= 1");
        }
        if !(self.d_max > 0.0 && self.d_max.is_finite()) {
            bad("d_max", "must be positive");
        }
        v
    }
}
