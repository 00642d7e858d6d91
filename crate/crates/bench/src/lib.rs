//! Fixtures shared by the benchmarks in `benches/`.

use satuav::planner::Transition;
use satuav::{MissionScenario, PlannerState};

/// The default scenario cut down to its first `devices` devices, with a
/// single search rollout per candidate interval.
pub fn small_scenario(devices: usize, lambda: f64) -> MissionScenario {
    let mut s = MissionScenario::baseline();
    s.devices.truncate(devices);
    s.visit_order = s.devices.iter().map(|d| d.id).collect();
    s.control.instability_factor = lambda;
    s.mission.search_rollouts = 1;
    s
}

/// A deterministic minibatch spread over distance, speed and action.
pub fn minibatch(n: usize) -> Vec<Transition> {
    (0..n)
        .map(|i| {
            let d = 250.0 * (i as f64 + 0.5) / n as f64;
            let v = (i * 7 % 50) as f64;
            Transition {
                state: PlannerState { d, v },
                action: i % 11,
                reward: -(1.0 + (i % 5) as f64),
                next_state: PlannerState { d: (d - 0.1 * v).max(0.0), v },
                terminal: i % 17 == 0,
            }
        })
        .collect()
}
