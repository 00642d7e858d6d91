//! Simulation and optimization toolkit for an energy-efficient satellite-UAV
//! data-collection mission.
//!
//! A UAV hovers above ground devices to collect their data, then uploads it
//! to a LEO satellite while flying to the next device. Its motion is tracked
//! by an LQR controller sitting on the far side of a delayed satellite link,
//! fed by a scheduled, lossy sensing process.
//!
//! Modules, bottom-up:
//! - [`scenario`]: configuration, defaults and validation.
//! - [`control`]: double-integrator dynamics and LQR synthesis.
//! - [`channel`]: satellite and air-to-ground link models, delay, sensing
//!   success probability.
//! - [`energy`]: per-slot energy accounting and energy efficiency.
//! - [`power`]: per-flight uplink power allocation.
//! - [`planner`]: distance-velocity MDP, DQN and reference trajectories.
//! - [`sensing`]: age of information, remote estimation, sensing intervals.
//! - [`sim`]: mission orchestration, logs, constraint audit and sweeps.
//! - [`validation`]: independent brute-force oracles.

pub mod channel;
pub mod control;
pub mod energy;
pub mod error;
pub mod planner;
pub mod power;
pub mod scenario;
pub mod sensing;
pub mod sim;
pub mod validation;

pub use channel::{DelayModel, LinkBudget};
pub use control::{ControlCommand, SystemMatrices, UavState};
pub use energy::{EnergyReport, Phase, SlotEnergy};
pub use error::{Error, Result};
pub use planner::{DqnConfig, PlannerState, QNetwork, ReferenceTrajectory, ReplayBuffer};
pub use power::SegmentPlan;
pub use scenario::{
    ChannelParams, ControlParams, EnergyParams, GroundDevice, MissionOptions, MissionScenario,
    Violation,
};
pub use sensing::{AoiClock, RemoteEstimator, SensingSchedule};
pub use sim::{MissionLog, MissionResult, PlannerSource};
pub use validation::OracleReport;

/// Derives an independent stream seed from a base seed and a stream label.
/// SplitMix64 finalizer over the combined words.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream labels for [`derive_seed`].
pub(crate) mod streams {
    pub const PLANT_NOISE: u64 = 1;
    pub const SENSING_LOSS: u64 = 2;
    pub const SCHEDULE_SEARCH: u64 = 3;
    pub const DQN: u64 = 4;
}
