//! Mirrored acceleration/deceleration assembly of a full flight segment.

use nalgebra::{Vector3, Vector6};

use super::dqn::greedy_rollout;
use super::env::step_energy;
use super::network::QNetwork;
use crate::error::{Error, Result};
use crate::scenario::EnergyParams;
use crate::validation::value_iteration::ValueTable;

pub const DEFAULT_ROLLOUT_BUDGET: usize = 10_000;

/// Applied accelerations and post-step speeds of an acceleration half.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HalfProfile {
    pub accels: Vec<f64>,
    pub speeds: Vec<f64>,
    pub energy: f64,
}

impl HalfProfile {
    /// Distance covered by the profile starting from rest.
    pub fn distance(&self, dt: f64) -> f64 {
        let mut v = 0.0;
        let mut s = 0.0;
        for (a, v_next) in self.accels.iter().zip(&self.speeds) {
            s += dt * v + 0.5 * dt * dt * a;
            v = *v_next;
        }
        s
    }
}

/// Anything that can plan the acceleration half of a flight.
pub trait HalfPolicy: Sync {
    fn half_profile(
        &self,
        d_half: f64,
        ep: &EnergyParams,
        dt: f64,
        v_max: f64,
        budget: usize,
    ) -> Result<HalfProfile>;
}

impl HalfPolicy for QNetwork {
    fn half_profile(
        &self,
        d_half: f64,
        ep: &EnergyParams,
        dt: f64,
        v_max: f64,
        budget: usize,
    ) -> Result<HalfProfile> {
        greedy_rollout(self, ep, d_half, dt, v_max, budget)
    }
}

impl HalfPolicy for ValueTable {
    fn half_profile(
        &self,
        d_half: f64,
        _ep: &EnergyParams,
        _dt: f64,
        _v_max: f64,
        budget: usize,
    ) -> Result<HalfProfile> {
        let plan = self.rollout(d_half, budget)?;
        Ok(HalfProfile {
            accels: plan.accels,
            speeds: plan.speeds,
            energy: plan.energy,
        })
    }
}

pub fn half_profile(
    policy: &dyn HalfPolicy,
    d_half: f64,
    ep: &EnergyParams,
    dt: f64,
    v_max: f64,
) -> Result<HalfProfile> {
    policy.half_profile(d_half, ep, dt, v_max, DEFAULT_ROLLOUT_BUDGET)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    /// `x_r(0..=slots)`; the first is `from` at rest, the last `to` at rest.
    pub states: Vec<Vector6<f64>>,
    /// Nominal acceleration of each slot.
    pub accels: Vec<Vector3<f64>>,
    /// Propulsion energy of the profile, J: twice the acceleration half.
    pub energy: f64,
    pub half_energy: f64,
    pub slots: usize,
}

impl ReferenceTrajectory {
    /// Reference at slot `k`, holding the endpoint after the segment ends.
    pub fn at(&self, k: usize) -> Vector6<f64> {
        self.states[k.min(self.slots)]
    }

    pub fn duration(&self, dt: f64) -> f64 {
        self.slots as f64 * dt
    }
}

/// Plans the straight flight `from → to`: the acceleration half from the
/// policy, then its time-reversed mirror, scaled uniformly so the two halves
/// cover exactly the segment length, then lifted onto the 3-D direction.
pub fn assemble_segment(
    policy: &dyn HalfPolicy,
    ep: &EnergyParams,
    from: &Vector3<f64>,
    to: &Vector3<f64>,
    dt: f64,
    v_max: f64,
    budget: usize,
) -> Result<ReferenceTrajectory> {
    let length = (to - from).norm();
    if !(length > 0.0) {
        return Err(Error::arg("to", "segment endpoints coincide"));
    }
    let dir = (to - from) / length;
    let half = policy.half_profile(0.5 * length, ep, dt, v_max, budget)?;
    if half.accels.is_empty() {
        return Err(Error::Infeasible("empty acceleration profile".into()));
    }
    let covered = half.distance(dt);
    if !(covered > 0.0) {
        return Err(Error::Infeasible("acceleration profile covers no distance".into()));
    }
    let scale = length / (2.0 * covered);

    let n = half.accels.len();
    let mut accels: Vec<f64> = half.accels.iter().map(|a| a * scale).collect();
    accels.extend(half.accels.iter().rev().map(|a| -a * scale));

    let mut states = Vec::with_capacity(2 * n + 1);
    let (mut s, mut v) = (0.0, 0.0);
    states.push(pack(from, &dir, s, v));
    for a in &accels {
        s += dt * v + 0.5 * dt * dt * a;
        v += dt * a;
        states.push(pack(from, &dir, s, v));
    }
    let last = states.len() - 1;
    states[last] = pack(to, &dir, 0.0, 0.0);

    let half_energy: f64 = accels[..n]
        .iter()
        .zip(&half.speeds)
        .map(|(a, v)| step_energy(ep, v * scale, a.abs(), dt))
        .sum();

    Ok(ReferenceTrajectory {
        accels: accels.iter().map(|a| dir * *a).collect(),
        states,
        energy: 2.0 * half_energy,
        half_energy,
        slots: 2 * n,
    })
}

fn pack(origin: &Vector3<f64>, dir: &Vector3<f64>, s: f64, v: f64) -> Vector6<f64> {
    let p = origin + dir * s;
    let w = dir * v;
    Vector6::new(p.x, p.y, p.z, w.x, w.y, w.z)
}
