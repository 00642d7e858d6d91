use nalgebra::Vector3;

use super::PlannerState;
use crate::energy::propulsion_energy;
use crate::scenario::EnergyParams;

/// Number of discrete accelerations, `0..=10` m/s².
pub const ACTIONS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: PlannerState,
    /// Acceleration actually applied after the speed cap.
    pub accel: f64,
    pub energy: f64,
    pub reward: f64,
    pub terminal: bool,
}

/// Propulsion energy of one planner slot, evaluated at the post-step speed.
pub fn step_energy(ep: &EnergyParams, v_next: f64, accel: f64, dt: f64) -> f64 {
    propulsion_energy(
        ep,
        &Vector3::new(v_next, 0.0, 0.0),
        &Vector3::new(accel, 0.0, 0.0),
        dt,
    )
}

/// One slot of the distance-velocity MDP:
/// `v' = v + δa`, `d' = d − δv − δ²a/2`, reward `−E_f + R_dest·1{d' ≤ 0}`.
/// Accelerations that would push the speed past `v_max` are reduced to land
/// exactly on it.
pub fn env_step(
    ep: &EnergyParams,
    s: PlannerState,
    action: usize,
    dt: f64,
    v_max: f64,
    dest_reward: f64,
) -> StepOutcome {
    debug_assert!(action < ACTIONS);
    let mut accel = action as f64;
    if s.v + dt * accel > v_max {
        accel = ((v_max - s.v) / dt).max(0.0);
    }
    let v = (s.v + dt * accel).min(v_max);
    let d = s.d - dt * s.v - 0.5 * dt * dt * accel;
    let energy = step_energy(ep, v, accel, dt);
    let terminal = d <= 0.0;
    let reward = -energy + if terminal { dest_reward } else { 0.0 };
    StepOutcome {
        next: PlannerState { d, v },
        accel,
        energy,
        reward,
        terminal,
    }
}
