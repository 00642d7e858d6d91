//! Remote estimation over the delayed satellite link: age of information,
//! delayed state reconstruction, open-loop prediction between updates, the
//! stability bound on the sensing interval, and the per-segment interval
//! search.
//!
//! Timing at slot `t` with round-trip delay `Δ` (see [`ClosedLoop::step`]):
//! a state sensed at `t` reaches the controller at `t + Δ`; a command issued
//! at `t` is applied by the UAV at `t + Δ`. The controller therefore issues
//! commands against its prediction of the state `Δ` slots ahead, and the UAV
//! meanwhile replays the commands already in flight.

use std::collections::VecDeque;

use nalgebra::{Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::control::{
    draw_noise, lqr_tracking, propagate_about, step_about_with_noise, ControlCommand, SystemMatrices,
};
use crate::energy::propulsion_energy;
use crate::error::{Error, Result};
use crate::planner::ReferenceTrajectory;
use crate::scenario::MissionScenario;
use crate::{derive_seed, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AoiClock {
    pub age: u64,
    pub delta: u64,
}

/// Age update: a successful reception resets the age to the delay,
/// otherwise it grows by one slot.
pub fn aoi_update(clock: AoiClock, received: bool) -> AoiClock {
    AoiClock {
        age: if received { clock.delta } else { clock.age + 1 },
        delta: clock.delta,
    }
}

/// Controller-side state.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteEstimator {
    pub last_received_state: Vector6<f64>,
    pub last_received_slot: Option<u64>,
    /// Predicted state at the slot the next issued command will be applied.
    pub predicted_state: Vector6<f64>,
    /// Commands issued but not yet applied, oldest first.
    pub command_queue: VecDeque<Vector3<f64>>,
}

impl RemoteEstimator {
    pub fn new(initial: Vector6<f64>) -> Self {
        Self {
            last_received_state: initial,
            last_received_slot: None,
            predicted_state: initial,
            command_queue: VecDeque::new(),
        }
    }
}

/// Reconstructs `x̂(k+Δ) = A^Δ x(k) + Σ_{j<Δ} A^j B u(k+Δ−j−1)` from a state
/// sensed at `k` and the `Δ` commands applied in `[k, k+Δ)`, oldest first.
/// Process noise is unknown to the controller and omitted.
pub fn remote_estimate(
    sm: &SystemMatrices,
    x_sensed: &Vector6<f64>,
    commands: &[Vector3<f64>],
    delta: usize,
) -> Result<Vector6<f64>> {
    let anchors = vec![Vector6::zeros(); commands.len()];
    remote_estimate_about(sm, x_sensed, commands, &anchors, delta)
}

/// [`remote_estimate`] for the anchored plant of
/// [`propagate_about`]: each slot adds `−(λ−1)·anchor` next to `B u`.
pub fn remote_estimate_about(
    sm: &SystemMatrices,
    x_sensed: &Vector6<f64>,
    commands: &[Vector3<f64>],
    anchors: &[Vector6<f64>],
    delta: usize,
) -> Result<Vector6<f64>> {
    if commands.len() != delta || anchors.len() != delta {
        return Err(Error::arg(
            "commands",
            format!(
                "expected {delta} commands and anchors, got {} and {}",
                commands.len(),
                anchors.len()
            ),
        ));
    }
    let drift = sm.max_eigenvalue - 1.0;
    let mut a_pow = nalgebra::Matrix6::<f64>::identity();
    let mut sum = Vector6::zeros();
    for j in 0..delta {
        let i = delta - j - 1;
        sum += a_pow * (sm.b * commands[i] - drift * anchors[i]);
        a_pow *= sm.a;
    }
    Ok(a_pow * x_sensed + sum)
}

/// One prediction step: command `ũ = u_r − K(x̃ − x_r)` (limited to
/// `u_max`) for the reference `x_r` and nominal acceleration `u_r` of the
/// slot the command applies to, then `x̃ ← A x̃ + B ũ − (λ−1)·anchor`. The
/// command joins the queue.
pub fn remote_predict(
    sm: &SystemMatrices,
    est: &mut RemoteEstimator,
    x_ref: &Vector6<f64>,
    u_ref: &Vector3<f64>,
    anchor: &Vector6<f64>,
) -> (Vector6<f64>, ControlCommand) {
    let cmd = lqr_tracking(sm, &est.predicted_state, x_ref, u_ref);
    est.predicted_state = propagate_about(sm, &est.predicted_state, &cmd.accel, anchor);
    est.command_queue.push_back(cmd.accel);
    (est.predicted_state, cmd)
}

/// Largest real interval `q` with `ρ > 1 − λ^{−q}`, i.e. `−ln(1−ρ)/ln λ`.
/// Unbounded (`+∞`) when `λ ≤ 1` or `ρ ≥ 1`.
pub fn max_sensing_interval(rho: f64, lambda: f64) -> f64 {
    if lambda <= 1.0 || rho >= 1.0 {
        return f64::INFINITY;
    }
    if rho <= 0.0 {
        return 0.0;
    }
    -(-rho).ln_1p() / lambda.ln()
}

/// Largest integer interval strictly below `q_max`; `q_cap` when the bound
/// is unbounded. Zero when no interval qualifies.
pub fn largest_admissible_interval(q_max: f64, q_cap: usize) -> usize {
    if q_max.is_infinite() {
        q_cap
    } else if q_max <= 1.0 {
        0
    } else {
        (q_max.ceil() as usize).saturating_sub(1)
    }
}

/// Sensing every `q` slots starting at the first slot.
pub fn periodic_gamma(q: usize, slots: usize) -> Vec<bool> {
    (0..slots).map(|k| k % q.max(1) == 0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensingSchedule {
    pub gamma: Vec<bool>,
    pub interval: usize,
    pub q_max_trace: Vec<f64>,
    /// No admissible interval existed; the schedule senses every slot.
    pub flagged: bool,
    /// `(q, mean rollout cost)` for every candidate evaluated.
    pub evaluations: Vec<(usize, f64)>,
}

/// Result of one closed-loop slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopStep {
    pub command: ControlCommand,
    /// A sensed state reached the controller this slot.
    pub received: bool,
    /// Controller's estimate of the current state before the step.
    pub remote_state: Vector6<f64>,
    pub state_before: Vector6<f64>,
    pub state_after: Vector6<f64>,
    pub velocity_clamped: bool,
}

/// Plant, sensing channel and controller advanced together slot by slot.
#[derive(Debug, Clone)]
pub struct ClosedLoop<'a> {
    sm: &'a SystemMatrices,
    pub x: Vector6<f64>,
    pub est: RemoteEstimator,
    pub aoi: AoiClock,
    /// Controller's estimate of the current state.
    pub current_estimate: Vector6<f64>,
    delta: usize,
    in_flight: VecDeque<(u64, Vector6<f64>)>,
    /// Commands applied in the last `Δ` slots with the anchor of each slot.
    applied: VecDeque<(Vector3<f64>, Vector6<f64>)>,
    initial: Vector6<f64>,
    /// Clamp flags matching `est.command_queue`.
    queued_clamped: VecDeque<bool>,
    pub slot: u64,
}

impl<'a> ClosedLoop<'a> {
    /// Starts with the controller knowing `x0` exactly and `Δ` zero
    /// commands already in flight.
    pub fn new(sm: &'a SystemMatrices, x0: Vector6<f64>, delta: usize) -> Self {
        Self::with_estimate(sm, x0, x0, delta)
    }

    /// Starts with the controller believing `estimate` while the plant is at
    /// `x0`.
    pub fn with_estimate(
        sm: &'a SystemMatrices,
        x0: Vector6<f64>,
        estimate: Vector6<f64>,
        delta: usize,
    ) -> Self {
        // The slots before the first issued command hold the initial
        // estimate as their reference.
        let mut est = RemoteEstimator::new(estimate);
        let mut ahead = estimate;
        for _ in 0..delta {
            est.command_queue.push_back(Vector3::zeros());
            ahead = propagate_about(sm, &ahead, &Vector3::zeros(), &estimate);
        }
        est.predicted_state = ahead;
        Self {
            sm,
            x: x0,
            est,
            aoi: AoiClock {
                age: delta as u64,
                delta: delta as u64,
            },
            current_estimate: estimate,
            delta,
            in_flight: VecDeque::new(),
            applied: (0..delta).map(|_| (Vector3::zeros(), estimate)).collect(),
            initial: estimate,
            queued_clamped: (0..delta).map(|_| false).collect(),
            slot: 0,
        }
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    /// Advances one slot.
    ///
    /// 1. A successful sensing of `x(t)` is queued to arrive at `t + Δ`.
    /// 2. A state arriving now is rolled forward through the `Δ` commands
    ///    applied since it was sensed, then through the commands in flight.
    /// 3. The controller issues the command for slot `t + Δ` against the
    ///    reference and feedforward of that slot; the UAV applies the
    ///    command for slot `t`.
    /// 4. The plant steps with noise `w` about `reference(t)`.
    ///
    /// Slots before the first issued command applies (`t < Δ`) are
    /// anchored at the initial estimate.
    pub fn step<F>(&mut self, sensed_ok: bool, reference: F, w: &Vector6<f64>) -> Result<LoopStep>
    where
        F: Fn(u64) -> Vector6<f64>,
    {
        self.step_tracking(sensed_ok, reference, |_| Vector3::zeros(), w)
    }

    /// `step` with a nominal acceleration `feedforward(k)` for each slot.
    pub fn step_tracking<F, G>(
        &mut self,
        sensed_ok: bool,
        reference: F,
        feedforward: G,
        w: &Vector6<f64>,
    ) -> Result<LoopStep>
    where
        F: Fn(u64) -> Vector6<f64>,
        G: Fn(u64) -> Vector3<f64>,
    {
        let t = self.slot;
        if sensed_ok {
            self.in_flight.push_back((t + self.delta as u64, self.x));
        }
        let mut arrived = None;
        while let Some((arrival, _)) = self.in_flight.front() {
            if *arrival > t {
                break;
            }
            arrived = self.in_flight.pop_front();
        }
        let received = arrived.is_some();
        let delta = self.delta as u64;
        let initial = self.initial;
        let anchor = |k: u64| if k < delta { initial } else { reference(k) };
        if let Some((_, sensed)) = arrived {
            let commands: Vec<Vector3<f64>> = self.applied.iter().map(|a| a.0).collect();
            let anchors: Vec<Vector6<f64>> = self.applied.iter().map(|a| a.1).collect();
            let now = remote_estimate_about(self.sm, &sensed, &commands, &anchors, self.delta)?;
            self.est.last_received_state = sensed;
            self.est.last_received_slot = Some(t - delta);
            self.current_estimate = now;
            let mut ahead = now;
            for (i, u) in self.est.command_queue.iter().enumerate() {
                ahead = propagate_about(self.sm, &ahead, u, &anchor(t + i as u64));
            }
            self.est.predicted_state = ahead;
        }
        self.aoi = aoi_update(self.aoi, received);

        let target = anchor(t + delta);
        let (_, issued) = remote_predict(self.sm, &mut self.est, &target, &feedforward(t + delta), &target);
        self.queued_clamped.push_back(issued.clamped);
        let u = self
            .est
            .command_queue
            .pop_front()
            .expect("queue holds the command for this slot");
        let command = ControlCommand {
            accel: u,
            clamped: self.queued_clamped.pop_front().unwrap_or(false),
        };
        let here = anchor(t);
        self.applied.push_back((u, here));
        if self.applied.len() > self.delta {
            self.applied.pop_front();
        }

        let remote_state = self.current_estimate;
        self.current_estimate = propagate_about(self.sm, &self.current_estimate, &u, &here);
        let before = self.x;
        let (after, velocity_clamped) = step_about_with_noise(self.sm, &self.x, &u, &here, w);
        self.x = after;
        self.slot += 1;
        Ok(LoopStep {
            command,
            received,
            remote_state,
            state_before: before,
            state_after: after,
            velocity_clamped,
        })
    }
}

pub fn velocity(x: &Vector6<f64>) -> Vector3<f64> {
    Vector3::new(x[3], x[4], x[5])
}

pub fn position(x: &Vector6<f64>) -> Vector3<f64> {
    Vector3::new(x[0], x[1], x[2])
}

/// Mean cost of flying `segment` with sensing every `q` slots over
/// `rollouts` seeded runs. Run `r` uses the same noise and loss draws for
/// every `q`.
fn rollout_cost(
    s: &MissionScenario,
    sm: &SystemMatrices,
    segment: &ReferenceTrajectory,
    rho_trace: &[f64],
    delta: usize,
    q: usize,
    seed: u64,
    segment_id: usize,
) -> Result<f64> {
    let gamma = periodic_gamma(q, segment.slots);
    let mut total = 0.0;
    let rollouts = s.mission.search_rollouts;
    for r in 0..rollouts {
        let index = (segment_id as u64) << 16 | r as u64;
        let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::SCHEDULE_SEARCH, index));
        let mut loss_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::SCHEDULE_SEARCH, index ^ 1 << 40));
        let mut lp = ClosedLoop::new(sm, segment.states[0], delta);
        let reference = |k: u64| segment.at(k as usize);
        let feedforward = |k: u64| segment.accels.get(k as usize).copied().unwrap_or_else(Vector3::zeros);
        for k in 0..segment.slots {
            let w = draw_noise(sm, &mut noise_rng);
            let draw: f64 = loss_rng.random();
            let ok = gamma[k] && (s.mission.sensing_always_succeeds || draw < rho_trace[k]);
            let st = lp.step_tracking(ok, reference, feedforward, &w)?;
            total += propulsion_energy(&s.energy, &velocity(&st.state_after), &st.command.accel, sm.slot_length);
            if gamma[k] {
                total += s.energy.sensing_energy;
            }
        }
    }
    let mean = total / rollouts as f64;
    // A rollout that leaves the representable range ranks last.
    Ok(if mean.is_finite() { mean } else { f64::INFINITY })
}

/// Chooses a constant sensing interval for a flight segment by exhaustive
/// search over the admissible intervals, scoring each by seeded closed-loop
/// rollouts of propulsion plus sensing energy. Ties go to the smaller
/// interval.
pub fn search_schedule(
    s: &MissionScenario,
    sm: &SystemMatrices,
    segment: &ReferenceTrajectory,
    rho_trace: &[f64],
    delta: usize,
    segment_id: usize,
    seed: u64,
) -> Result<SensingSchedule> {
    if rho_trace.len() < segment.slots {
        return Err(Error::arg("rho_trace", "one probability per segment slot is required"));
    }
    let q_max_trace: Vec<f64> = rho_trace[..segment.slots]
        .iter()
        .map(|rho| max_sensing_interval(*rho, sm.max_eigenvalue))
        .collect();
    let bound = q_max_trace.iter().copied().fold(f64::INFINITY, f64::min);
    let admissible = largest_admissible_interval(bound, s.mission.q_cap);
    if admissible == 0 {
        return Ok(SensingSchedule {
            gamma: periodic_gamma(1, segment.slots),
            interval: 1,
            q_max_trace,
            flagged: true,
            evaluations: Vec::new(),
        });
    }
    // Intervals at or beyond the segment length all sense only at slot 0.
    let top = admissible.min(segment.slots.max(1));
    let evaluations: Vec<(usize, f64)> = (1..=top)
        .into_par_iter()
        .map(|q| rollout_cost(s, sm, segment, rho_trace, delta, q, seed, segment_id).map(|c| (q, c)))
        .collect::<Result<_>>()?;
    let mut best = evaluations[0];
    for e in &evaluations[1..] {
        if e.1 < best.1 {
            best = *e;
        }
    }
    Ok(SensingSchedule {
        gamma: periodic_gamma(best.0, segment.slots),
        interval: best.0,
        q_max_trace,
        flagged: false,
        evaluations,
    })
}
