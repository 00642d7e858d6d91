//! Value iteration on a discretized (distance, speed) grid for the
//! acceleration half of a flight. Speeds sit on an exact lattice of
//! `slot_length` m/s (every action changes the speed by a whole number of
//! lattice steps); distances use a uniform grid with linear interpolation.
//!
//! The propulsion model and the MDP transition are re-derived here rather
//! than imported, so the oracle does not share code with the planner.

use crate::error::{Error, Result};
use crate::scenario::EnergyParams;

pub const MAX_SWEEPS: usize = 100_000;
const N_ACTIONS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGrid {
    /// Distance spacing, m. Must be at most 0.5.
    pub d_step: f64,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self { d_step: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePlan {
    pub energy: f64,
    pub actions: Vec<usize>,
    pub accels: Vec<f64>,
    pub speeds: Vec<f64>,
    /// Interpolated table value at the start state.
    pub value_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct ValueTable {
    kappa1: f64,
    kappa2: f64,
    gravity: f64,
    v_floor: f64,
    dt: f64,
    d_step: f64,
    d_nodes: usize,
    speeds: Vec<f64>,
    /// Row-major `[d][v]`.
    values: Vec<f64>,
    pub sweeps: usize,
}

impl ValueTable {
    fn slot_cost(&self, v_next: f64, accel: f64) -> f64 {
        let v = if v_next < self.v_floor { self.v_floor } else { v_next };
        let ratio = accel / self.gravity;
        self.dt * (self.kappa1 * v.powi(3) + self.kappa2 * (1.0 + ratio * ratio) / v)
    }

    /// Speed index reached from `vi` under integer acceleration `a`, and the
    /// acceleration actually applied.
    fn transition(&self, vi: usize, a: usize) -> (usize, f64) {
        let top = self.speeds.len() - 1;
        let j = (vi + a).min(top);
        let applied = (self.speeds[j] - self.speeds[vi]) / self.dt;
        (j, applied)
    }

    fn value(&self, di: usize, vi: usize) -> f64 {
        self.values[di * self.speeds.len() + vi]
    }

    /// `V(d, v_j)` with linear interpolation in `d`; zero at or below 0.
    fn interp(&self, d: f64, vj: usize) -> f64 {
        if d <= 0.0 {
            return 0.0;
        }
        let x = d / self.d_step;
        let i = x.floor() as usize;
        if i + 1 >= self.d_nodes {
            return self.value(self.d_nodes - 1, vj);
        }
        let w = x - i as f64;
        (1.0 - w) * self.value(i, vj) + w * self.value(i + 1, vj)
    }

    /// Solves the table for distances up to `d_extent`.
    pub fn solve(ep: &EnergyParams, dt: f64, v_max: f64, d_extent: f64, grid: OracleGrid) -> Result<Self> {
        if !(grid.d_step > 0.0 && grid.d_step <= 0.5) {
            return Err(Error::arg("d_step", "distance grid spacing must lie in (0, 0.5] m"));
        }
        if !(dt > 0.0 && v_max > 0.0 && d_extent >= 0.0) {
            return Err(Error::arg("grid", "slot length, v_max and extent must be positive"));
        }
        let n_lattice = (v_max / dt + 1e-9).floor() as usize;
        let mut speeds: Vec<f64> = (0..=n_lattice).map(|i| i as f64 * dt).collect();
        if v_max - speeds[n_lattice] > 1e-9 {
            speeds.push(v_max);
        }
        let d_nodes = (d_extent / grid.d_step).ceil() as usize + 2;
        let mut table = Self {
            kappa1: ep.kappa1,
            kappa2: ep.kappa2,
            gravity: ep.gravity,
            v_floor: ep.v_floor,
            dt,
            d_step: grid.d_step,
            d_nodes,
            values: vec![0.0; d_nodes * speeds.len()],
            speeds,
            sweeps: 0,
        };

        let mut max_change = f64::INFINITY;
        while table.sweeps < MAX_SWEEPS {
            max_change = table.sweep();
            table.sweeps += 1;
            if max_change <= 1e-9 {
                return Ok(table);
            }
        }
        Err(Error::ValueIterationNonConvergence {
            sweeps: table.sweeps,
            max_change,
        })
    }

    /// Gauss-Seidel sweep in increasing distance and decreasing speed, which
    /// resolves every dependency except the self-loop of a zero-acceleration
    /// step that stays inside the current distance cell; that one is solved
    /// in closed form. Returns the largest value change.
    fn sweep(&mut self) -> f64 {
        let nv = self.speeds.len();
        let mut max_change: f64 = 0.0;
        for di in 1..self.d_nodes {
            let d = di as f64 * self.d_step;
            for vi in (0..nv).rev() {
                let v = self.speeds[vi];
                let mut best = f64::INFINITY;
                for a in 0..N_ACTIONS {
                    let (vj, applied) = self.transition(vi, a);
                    let cost = self.slot_cost(self.speeds[vj], applied);
                    let d_next = d - self.dt * v - 0.5 * self.dt * self.dt * applied;
                    let candidate = if vj == vi && d_next > (di - 1) as f64 * self.d_step {
                        // d' lies in (d_{i-1}, d_i] at unchanged speed.
                        let w = (d_next / self.d_step) - (di - 1) as f64;
                        if w >= 1.0 {
                            f64::INFINITY
                        } else {
                            (cost + (1.0 - w) * self.value(di - 1, vi)) / (1.0 - w)
                        }
                    } else {
                        cost + self.interp(d_next, vj)
                    };
                    if candidate < best {
                        best = candidate;
                    }
                }
                let idx = di * nv + vi;
                let change = (best - self.values[idx]).abs();
                if change.is_finite() {
                    max_change = max_change.max(change);
                } else {
                    max_change = f64::INFINITY;
                }
                self.values[idx] = best;
            }
        }
        max_change
    }

    pub fn extent(&self) -> f64 {
        (self.d_nodes - 2) as f64 * self.d_step
    }

    /// Greedy rollout against the table from `(d_half, 0)`, simulated with
    /// exact (ungridded) distances. Ties go to the smaller acceleration.
    pub fn rollout(&self, d_half: f64, budget: usize) -> Result<OraclePlan> {
        let mut plan = OraclePlan {
            energy: 0.0,
            actions: Vec::new(),
            accels: Vec::new(),
            speeds: Vec::new(),
            value_estimate: 0.0,
        };
        if d_half <= 0.0 {
            return Ok(plan);
        }
        if d_half > self.extent() + 1e-9 {
            return Err(Error::arg(
                "d_half",
                format!("{d_half} m exceeds the solved extent {} m", self.extent()),
            ));
        }
        plan.value_estimate = self.interp(d_half, 0);
        let mut d = d_half;
        let mut vi = 0usize;
        for _ in 0..budget {
            let v = self.speeds[vi];
            let mut best = (f64::INFINITY, 0usize, 0usize, 0.0, 0.0, 0.0);
            for a in 0..N_ACTIONS {
                let (vj, applied) = self.transition(vi, a);
                let cost = self.slot_cost(self.speeds[vj], applied);
                let d_next = d - self.dt * v - 0.5 * self.dt * self.dt * applied;
                if vj == vi && d_next >= d {
                    continue;
                }
                let total = cost + self.interp(d_next, vj);
                if total < best.0 {
                    best = (total, a, vj, applied, cost, d_next);
                }
            }
            let (_, a, vj, applied, cost, d_next) = best;
            plan.actions.push(a);
            plan.accels.push(applied);
            plan.speeds.push(self.speeds[vj]);
            plan.energy += cost;
            d = d_next;
            vi = vj;
            if d <= 0.0 {
                return Ok(plan);
            }
        }
        Err(Error::SlotBudgetExceeded {
            budget: budget as u64,
            context: format!("oracle rollout from {d_half} m"),
        })
    }
}

/// Minimal propulsion energy to cover `d_half` from rest, with the action
/// sequence achieving it.
pub fn plan_oracle(
    ep: &EnergyParams,
    dt: f64,
    v_max: f64,
    d_half: f64,
    grid: OracleGrid,
) -> Result<OraclePlan> {
    let table = ValueTable::solve(ep, dt, v_max, d_half.max(0.0), grid)?;
    table.rollout(d_half, 100_000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::MissionScenario;

    fn ep() -> EnergyParams {
        MissionScenario::baseline().energy
    }

    #[test]
    fn zero_distance() {
        let p = plan_oracle(&ep(), 0.1, 50.0, 0.0, OracleGrid::default()).unwrap();
        assert_eq!(p.energy, 0.0);
        assert!(p.actions.is_empty());
    }

    #[test]
    fn one_step_reach() {
        // a = 10 from rest covers δ²a/2 = 0.05 m in one slot.
        let p = plan_oracle(&ep(), 0.1, 50.0, 0.04, OracleGrid::default()).unwrap();
        assert_eq!(p.actions.len(), 1);
    }

    #[test]
    fn grid_refinement_is_consistent() {
        let ep = ep();
        let coarse = plan_oracle(&ep, 0.1, 50.0, 125.0, OracleGrid { d_step: 0.5 }).unwrap();
        let fine = plan_oracle(&ep, 0.1, 50.0, 125.0, OracleGrid { d_step: 0.25 }).unwrap();
        assert!((coarse.energy / fine.energy - 1.0).abs() < 0.02);
        assert!(coarse.energy > 0.0);
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(ValueTable::solve(&ep(), 0.1, 50.0, 10.0, OracleGrid { d_step: 1.0 }).is_err());
    }
}
