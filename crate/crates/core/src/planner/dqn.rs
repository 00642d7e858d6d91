//! DQN training on the acceleration-half MDP.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::assemble::HalfProfile;
use super::env::{env_step, ACTIONS};
use super::network::{Adam, QNetwork, Transition};
use super::replay::ReplayBuffer;
use super::{Optimizer, PlannerState};
use crate::error::{Error, Result};
use crate::scenario::{EnergyParams, MissionScenario};
use crate::{derive_seed, streams};

pub const TRAINING_SCHEMA: &str = "satuav.training.v1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingRecord {
    pub schema: &'static str,
    pub episode: usize,
    pub distance: f64,
    pub steps: usize,
    /// Propulsion energy of the exploratory episode, J.
    pub energy: f64,
    pub epsilon: f64,
    #[serde(rename = "return")]
    pub episode_return: f64,
    /// Energy of a greedy rollout from the episode's start distance after
    /// the episode; empty when the greedy policy does not reach the midpoint
    /// within the episode step limit.
    pub greedy_energy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<TrainingRecord>,
}

impl TrainingLog {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.records {
            wr.serialize(r)?;
        }
        wr.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Greedy rollout of `net` from `(d_half, 0)` until the midpoint is reached.
pub fn greedy_rollout(
    net: &QNetwork,
    ep: &EnergyParams,
    d_half: f64,
    dt: f64,
    v_max: f64,
    budget: usize,
) -> Result<HalfProfile> {
    let mut profile = HalfProfile::default();
    if d_half <= 0.0 {
        return Ok(profile);
    }
    let mut s = PlannerState { d: d_half, v: 0.0 };
    for _ in 0..budget {
        let out = env_step(ep, s, net.greedy_action(&s), dt, v_max, 0.0);
        profile.accels.push(out.accel);
        profile.speeds.push(out.next.v);
        profile.energy += out.energy;
        s = out.next;
        if out.terminal {
            return Ok(profile);
        }
    }
    Err(Error::SlotBudgetExceeded {
        budget: budget as u64,
        context: format!("greedy rollout from {d_half} m did not reach the midpoint"),
    })
}

/// Trains a Q-network on the scenario's energy model. Distances in
/// `training_distances` are trained in order, each for
/// `episodes_per_distance` episodes, with one replay buffer and one ε
/// schedule spanning the whole run.
pub fn train_dqn(s: &MissionScenario, seed: u64) -> Result<(QNetwork, TrainingLog)> {
    let cfg = &s.dqn;
    let bad = cfg.violations();
    if !bad.is_empty() {
        return Err(Error::InvalidScenario(bad));
    }
    let ep = &s.energy;
    let dt = s.control.slot_length;
    let v_max = s.control.v_max;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::DQN, 0));
    let mut online = QNetwork::new(cfg.hidden, cfg.d_max, v_max, &mut rng);
    let mut target = online.clone();
    let mut adam = Adam::new(online.param_count());
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut log = TrainingLog::default();

    let decay_episodes = (cfg.total_episodes() as f64 * cfg.epsilon_decay_fraction).max(1.0);
    let mut updates = 0usize;
    let mut targets = Vec::with_capacity(cfg.batch_size);

    for (phase, &d0) in cfg.training_distances.iter().enumerate() {
        for k in 0..cfg.episodes_per_distance {
            let episode = phase * cfg.episodes_per_distance + k;
            let frac = (episode as f64 / decay_episodes).min(1.0);
            let epsilon = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;

            let mut state = PlannerState { d: d0, v: 0.0 };
            let (mut energy, mut ret, mut steps) = (0.0, 0.0, 0usize);
            while steps < cfg.max_episode_steps {
                let action = if rng.random::<f64>() < epsilon {
                    rng.random_range(0..ACTIONS)
                } else {
                    online.greedy_action(&state)
                };
                let out = env_step(ep, state, action, dt, v_max, cfg.dest_reward);
                buffer.push(Transition {
                    state,
                    action,
                    reward: out.reward / cfg.reward_scale,
                    next_state: out.next,
                    terminal: out.terminal,
                });
                energy += out.energy;
                ret += out.reward;
                steps += 1;

                if buffer.len() >= cfg.batch_size {
                    let batch = buffer.sample(cfg.batch_size, &mut rng);
                    targets.clear();
                    targets.extend(batch.iter().map(|t| {
                        if t.terminal {
                            t.reward
                        } else {
                            t.reward + cfg.discount * target.max_q(&t.next_state)
                        }
                    }));
                    let (loss, grads) = online.loss_and_gradients(&batch, &targets);
                    if !loss.is_finite() || !grads.is_finite() {
                        return Err(Error::Divergence {
                            episode,
                            step: steps,
                            reason: format!("non-finite loss or gradient (loss {loss})"),
                        });
                    }
                    match cfg.optimizer {
                        Optimizer::Sgd => online.apply_sgd(&grads, cfg.learning_rate),
                        Optimizer::Adam => adam.step(&mut online, &grads, cfg.learning_rate),
                    }
                    updates += 1;
                    if updates % cfg.target_update == 0 {
                        target = online.clone();
                    }
                }

                state = out.next;
                if out.terminal {
                    break;
                }
            }
            if !online.is_finite() {
                return Err(Error::Divergence {
                    episode,
                    step: steps,
                    reason: "non-finite network weight".into(),
                });
            }
            let greedy_energy = greedy_rollout(&online, ep, d0, dt, v_max, cfg.max_episode_steps)
                .ok()
                .map(|p| p.energy);
            log.records.push(TrainingRecord {
                schema: TRAINING_SCHEMA,
                episode,
                distance: d0,
                steps,
                energy,
                epsilon,
                episode_return: ret,
                greedy_energy,
            });
        }
    }
    Ok((online, log))
}
