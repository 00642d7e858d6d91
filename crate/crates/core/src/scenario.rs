//! Mission configuration: world constants, device placement and every tunable
//! parameter, loaded from a JSON config tree and frozen into an immutable
//! [`MissionScenario`].
//!
//! All physical quantities are SI base units. A handful of keys also accept a
//! decibel form under an explicit suffix (`*_db`, or `noise_power_dbm`), which
//! is converted to linear at load time. Writing a scenario back out always uses
//! the linear keys, so `parse(write(s)) == s`.

use std::path::Path;

use nalgebra::{Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::DqnConfig;

pub mod defaults {
    pub const SLOT_LENGTH: f64 = 0.1;
    /// Shape of the process-noise covariance: unit position, 0.1 velocity.
    pub const STATE_NOISE_DIAG: [f64; 6] = [1.0, 1.0, 1.0, 0.1, 0.1, 0.1];
    /// Per-slot position noise standard deviation, m; scales
    /// [`STATE_NOISE_DIAG`].
    pub const MOTION_NOISE_STD: f64 = 0.005;
    pub const ACTION_COST_DIAG: f64 = 0.5;
    pub const STATE_WEIGHT_DIAG: f64 = 1.0;
    pub const INSTABILITY_FACTOR: f64 = 1.0;
    pub const V_MAX: f64 = 50.0;
    pub const U_MAX: f64 = 10.0;

    pub const CARRIER_FREQ: f64 = 2e9;
    pub const SAT_BANDWIDTH: f64 = 5e6;
    pub const GROUND_BANDWIDTH: f64 = 0.5e6;
    /// -110 dBm.
    pub const NOISE_POWER: f64 = 1e-14;
    /// -80 dB at 1 m.
    pub const REF_CHANNEL_GAIN: f64 = 1e-8;
    pub const SAT_ALTITUDE: f64 = 1e6;
    pub const ENV_A: f64 = 9.61;
    pub const ENV_B: f64 = 0.16;
    pub const EXCESS_LOSS_LOS: f64 = 1.26;
    pub const EXCESS_LOSS_NLOS: f64 = 100.0;
    pub const RX_ANTENNA_GAIN: f64 = 1.0;
    pub const EARTH_RADIUS: f64 = 6.371e6;
    pub const MAX_ELEVATION_DEG: f64 = 30.0;
    pub const MIN_CENTRAL_ANGLE_DEG: f64 = 50.0;
    /// 3 dB.
    pub const SNR_THRESHOLD_DB: f64 = 3.0;
    pub const LIGHT_SPEED: f64 = 3e8;
    /// Uplink power at which the default satellite reference gain gives SNR = 1.
    pub const SAT_UNIT_SNR_POWER: f64 = 10.0;

    pub const KAPPA1: f64 = 9.26e-4;
    pub const KAPPA2: f64 = 2250.0;
    pub const GRAVITY: f64 = 9.8;
    pub const HOVER_POWER: f64 = 100.0;
    pub const SENSING_ENERGY: f64 = 0.05;
    pub const V_FLOOR: f64 = 0.1;

    pub const DEVICE_POWER: f64 = 0.1;
    pub const HOVER_ALTITUDE: f64 = 100.0;
    pub const DATA_SIZE: f64 = 1e7;
    pub const P_MAX: f64 = 10.0;
    pub const SEED: u64 = 42;
    pub const START_POSITION: [f64; 3] = [0.0, 0.0, 100.0];

    /// Ground-device layout used when the config lists no devices: ten nodes
    /// in a 1000 m x 1000 m area.
    pub const DEVICE_LAYOUT: [[f64; 2]; 10] = [
        [150.0, 200.0],
        [400.0, 120.0],
        [700.0, 180.0],
        [880.0, 400.0],
        [620.0, 450.0],
        [350.0, 420.0],
        [120.0, 600.0],
        [300.0, 820.0],
        [600.0, 760.0],
        [860.0, 850.0],
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundDevice {
    pub id: u32,
    pub position: Vector3<f64>,
    /// Uplink transmit power of the device, W.
    pub transmit_power: f64,
    /// Where the UAV hovers to collect this device's data.
    pub hover_point: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlParams {
    /// Slot length in seconds. Used as the sampling interval of the dynamics,
    /// the energy accounting slot and the delay quantum.
    pub slot_length: f64,
    /// Process noise covariance, 6x6 PSD.
    pub state_noise_cov: Matrix6<f64>,
    /// LQR action weight, 3x3 PD.
    pub action_cost_weight: Matrix3<f64>,
    /// LQR state weight, 6x6 PD.
    pub state_weight: Matrix6<f64>,
    /// Multiplies the diagonal of the per-axis transition block; equals the
    /// largest eigenvalue of the transition matrix.
    pub instability_factor: f64,
    pub v_max: f64,
    pub u_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub carrier_freq: f64,
    pub sat_bandwidth: f64,
    pub ground_bandwidth: f64,
    pub noise_power: f64,
    /// Reference gain at 1 m of the ground link model.
    pub ref_channel_gain: f64,
    /// Reference gain of the UAV-to-satellite link, kept separate from the
    /// ground value so the uplink budget can be calibrated.
    pub sat_ref_gain: f64,
    pub sat_altitude: f64,
    pub env_a: f64,
    pub env_b: f64,
    pub excess_loss_los: f64,
    pub excess_loss_nlos: f64,
    pub rx_antenna_gain: f64,
    pub earth_radius: f64,
    pub max_elevation_deg: f64,
    pub min_central_angle_deg: f64,
    /// Linear SNR threshold. Only applied when `snr_floor_enabled`.
    pub snr_threshold: f64,
    pub snr_floor_enabled: bool,
    pub light_speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyParams {
    pub kappa1: f64,
    pub kappa2: f64,
    pub gravity: f64,
    pub hover_power: f64,
    /// Energy per sensing operation, J.
    pub sensing_energy: f64,
    /// Speed below which the propulsion model is evaluated at this floor.
    pub v_floor: f64,
}

/// Simulator knobs that are not physical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionOptions {
    /// Let a leftover upload backlog overlap the next device's collection
    /// hover. When off, the backlog is drained in dedicated hover slots
    /// before collection starts.
    pub upload_during_hover: bool,
    /// Every scheduled sensing reaches the controller (no Bernoulli loss).
    pub sensing_always_succeeds: bool,
    /// Upper bound on candidate sensing intervals when the stability bound is
    /// unbounded (largest eigenvalue 1).
    pub q_cap: usize,
    /// Common-random-number rollouts averaged per candidate interval.
    pub search_rollouts: usize,
    pub slot_budget: u64,
    /// Fly back to the start position after the last device so its data can
    /// be uploaded in flight.
    pub return_to_start: bool,
    /// Forces every leg to sense at this interval, bypassing the search and
    /// the stability bound. Used to exercise the constraint audit.
    pub forced_sensing_interval: Option<usize>,
}

impl Default for MissionOptions {
    fn default() -> Self {
        Self {
            upload_during_hover: true,
            sensing_always_succeeds: false,
            q_cap: 50,
            search_rollouts: 4,
            slot_budget: 1_000_000,
            return_to_start: true,
            forced_sensing_interval: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionScenario {
    pub devices: Vec<GroundDevice>,
    /// Bits to collect from each device.
    pub data_size: f64,
    pub p_max: f64,
    pub start_position: Vector3<f64>,
    pub control: ControlParams,
    pub channel: ChannelParams,
    pub energy: EnergyParams,
    pub mission: MissionOptions,
    pub dqn: DqnConfig,
    pub visit_order: Vec<u32>,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

// ---------------------------------------------------------------------------
// File schema
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_position: Option<[f64; 3]>,
    /// Only used to fill in missing device hover points.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hover_altitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub devices: Option<Vec<DeviceFile>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visit_order: Option<Vec<u32>>,
    pub control: ControlFile,
    pub channel: ChannelFile,
    pub energy: EnergyFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mission: Option<MissionOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dqn: Option<DqnConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceFile {
    pub id: u32,
    pub position: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmit_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hover_point: Option<[f64; 3]>,
}

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_noise_cov: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action_cost_weight: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_weight: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instability_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carrier_freq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sat_bandwidth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_bandwidth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_power_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_channel_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_channel_gain_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sat_ref_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sat_ref_gain_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sat_altitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub env_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub env_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_loss_los: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_loss_los_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_loss_nlos: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_loss_nlos_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_antenna_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_antenna_gain_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub earth_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_elevation_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_central_angle_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_threshold_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_floor_enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub light_speed: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gravity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hover_power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensing_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_floor: Option<f64>,
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Reads, default-fills and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<MissionScenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<MissionScenario> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    from_file(file)
}

/// Builds a scenario from its file form, then validates it.
pub fn from_file(file: ScenarioFile) -> Result<MissionScenario> {
    let mut problems = Vec::new();
    let scenario = build(file, &mut problems);
    problems.extend(validate_scenario(&scenario));
    if problems.is_empty() {
        Ok(scenario)
    } else {
        Err(Error::InvalidScenario(problems))
    }
}

/// Serializes a scenario to the config format, using linear keys only.
pub fn write_scenario(s: &MissionScenario) -> String {
    let file = to_file(s);
    serde_json::to_string_pretty(&file).expect("scenario file serializes")
}

impl MissionScenario {
    /// Default parameterization with the ten-device layout.
    pub fn baseline() -> Self {
        parse_scenario("{}").expect("default scenario is valid")
    }

    pub fn device(&self, id: u32) -> Option<&GroundDevice> {
        self.devices.iter().find(|d| d.id == id)
    }

    /// Devices in visiting order.
    pub fn ordered_devices(&self) -> Vec<&GroundDevice> {
        self.visit_order
            .iter()
            .filter_map(|id| self.device(*id))
            .collect()
    }
}

fn pick(
    linear: Option<f64>,
    db: Option<f64>,
    convert: fn(f64) -> f64,
    field: &str,
    default: f64,
    problems: &mut Vec<Violation>,
) -> f64 {
    match (linear, db) {
        (Some(v), None) => v,
        (None, Some(d)) => convert(d),
        (None, None) => default,
        (Some(v), Some(_)) => {
            problems.push(Violation::new(
                field,
                "given in both linear and dB form; specify one",
            ));
            v
        }
    }
}

fn matrix<const N: usize>(
    rows: Option<Rows>,
    field: &str,
    default: nalgebra::SMatrix<f64, N, N>,
    problems: &mut Vec<Violation>,
) -> nalgebra::SMatrix<f64, N, N> {
    let Some(rows) = rows else { return default };
    if rows.len() != N || rows.iter().any(|r| r.len() != N) {
        problems.push(Violation::new(field, format!("expected a {N}x{N} matrix")));
        return default;
    }
    nalgebra::SMatrix::<f64, N, N>::from_fn(|i, j| rows[i][j])
}

fn rows_of<const N: usize>(m: &nalgebra::SMatrix<f64, N, N>) -> Rows {
    (0..N).map(|i| (0..N).map(|j| m[(i, j)]).collect()).collect()
}

fn build(file: ScenarioFile, problems: &mut Vec<Violation>) -> MissionScenario {
    use defaults as d;

    let c = file.control;
    let control = ControlParams {
        slot_length: c.slot_length.unwrap_or(d::SLOT_LENGTH),
        state_noise_cov: matrix(
            c.state_noise_cov,
            "control.state_noise_cov",
            Matrix6::from_diagonal(&d::STATE_NOISE_DIAG.into()) * d::MOTION_NOISE_STD.powi(2),
            problems,
        ),
        action_cost_weight: matrix(
            c.action_cost_weight,
            "control.action_cost_weight",
            Matrix3::identity() * d::ACTION_COST_DIAG,
            problems,
        ),
        state_weight: matrix(
            c.state_weight,
            "control.state_weight",
            Matrix6::identity() * d::STATE_WEIGHT_DIAG,
            problems,
        ),
        instability_factor: c.instability_factor.unwrap_or(d::INSTABILITY_FACTOR),
        v_max: c.v_max.unwrap_or(d::V_MAX),
        u_max: c.u_max.unwrap_or(d::U_MAX),
    };

    let ch = file.channel;
    let noise_power = pick(
        ch.noise_power,
        ch.noise_power_dbm,
        dbm_to_watts,
        "channel.noise_power",
        d::NOISE_POWER,
        problems,
    );
    let sat_altitude = ch.sat_altitude.unwrap_or(d::SAT_ALTITUDE);
    // Default uplink calibration: SNR = 1 at 10 W.
    let sat_default = noise_power * sat_altitude * sat_altitude / d::SAT_UNIT_SNR_POWER;
    let channel = ChannelParams {
        carrier_freq: ch.carrier_freq.unwrap_or(d::CARRIER_FREQ),
        sat_bandwidth: ch.sat_bandwidth.unwrap_or(d::SAT_BANDWIDTH),
        ground_bandwidth: ch.ground_bandwidth.unwrap_or(d::GROUND_BANDWIDTH),
        noise_power,
        ref_channel_gain: pick(
            ch.ref_channel_gain,
            ch.ref_channel_gain_db,
            db_to_linear,
            "channel.ref_channel_gain",
            d::REF_CHANNEL_GAIN,
            problems,
        ),
        sat_ref_gain: pick(
            ch.sat_ref_gain,
            ch.sat_ref_gain_db,
            db_to_linear,
            "channel.sat_ref_gain",
            sat_default,
            problems,
        ),
        sat_altitude,
        env_a: ch.env_a.unwrap_or(d::ENV_A),
        env_b: ch.env_b.unwrap_or(d::ENV_B),
        excess_loss_los: pick(
            ch.excess_loss_los,
            ch.excess_loss_los_db,
            db_to_linear,
            "channel.excess_loss_los",
            d::EXCESS_LOSS_LOS,
            problems,
        ),
        excess_loss_nlos: pick(
            ch.excess_loss_nlos,
            ch.excess_loss_nlos_db,
            db_to_linear,
            "channel.excess_loss_nlos",
            d::EXCESS_LOSS_NLOS,
            problems,
        ),
        rx_antenna_gain: pick(
            ch.rx_antenna_gain,
            ch.rx_antenna_gain_db,
            db_to_linear,
            "channel.rx_antenna_gain",
            d::RX_ANTENNA_GAIN,
            problems,
        ),
        earth_radius: ch.earth_radius.unwrap_or(d::EARTH_RADIUS),
        max_elevation_deg: ch.max_elevation_deg.unwrap_or(d::MAX_ELEVATION_DEG),
        min_central_angle_deg: ch.min_central_angle_deg.unwrap_or(d::MIN_CENTRAL_ANGLE_DEG),
        snr_threshold: pick(
            ch.snr_threshold,
            ch.snr_threshold_db,
            db_to_linear,
            "channel.snr_threshold",
            db_to_linear(d::SNR_THRESHOLD_DB),
            problems,
        ),
        snr_floor_enabled: ch.snr_floor_enabled.unwrap_or(false),
        light_speed: ch.light_speed.unwrap_or(d::LIGHT_SPEED),
    };

    let e = file.energy;
    let energy = EnergyParams {
        kappa1: e.kappa1.unwrap_or(d::KAPPA1),
        kappa2: e.kappa2.unwrap_or(d::KAPPA2),
        gravity: e.gravity.unwrap_or(d::GRAVITY),
        hover_power: e.hover_power.unwrap_or(d::HOVER_POWER),
        sensing_energy: e.sensing_energy.unwrap_or(d::SENSING_ENERGY),
        v_floor: e.v_floor.unwrap_or(d::V_FLOOR),
    };

    let hover_altitude = file.hover_altitude.unwrap_or(d::HOVER_ALTITUDE);
    let devices: Vec<GroundDevice> = match file.devices {
        Some(list) => list
            .into_iter()
            .map(|df| {
                let position = Vector3::from(df.position);
                GroundDevice {
                    id: df.id,
                    position,
                    transmit_power: df.transmit_power.unwrap_or(d::DEVICE_POWER),
                    hover_point: df
                        .hover_point
                        .map(Vector3::from)
                        .unwrap_or_else(|| Vector3::new(position.x, position.y, hover_altitude)),
                }
            })
            .collect(),
        None => d::DEVICE_LAYOUT
            .iter()
            .enumerate()
            .map(|(i, [x, y])| GroundDevice {
                id: i as u32,
                position: Vector3::new(*x, *y, 0.0),
                transmit_power: d::DEVICE_POWER,
                hover_point: Vector3::new(*x, *y, hover_altitude),
            })
            .collect(),
    };

    let start_position = Vector3::from(file.start_position.unwrap_or(d::START_POSITION));
    let visit_order = file
        .visit_order
        .unwrap_or_else(|| nearest_neighbor_order(&start_position, &devices));

    MissionScenario {
        devices,
        data_size: file.data_size.unwrap_or(d::DATA_SIZE),
        p_max: file.p_max.unwrap_or(d::P_MAX),
        start_position,
        control,
        channel,
        energy,
        mission: file.mission.unwrap_or_default(),
        dqn: file.dqn.unwrap_or_default(),
        visit_order,
        rng_seed: file.seed.unwrap_or(d::SEED),
    }
}

fn to_file(s: &MissionScenario) -> ScenarioFile {
    let c = &s.control;
    let ch = &s.channel;
    let e = &s.energy;
    ScenarioFile {
        seed: Some(s.rng_seed),
        data_size: Some(s.data_size),
        p_max: Some(s.p_max),
        start_position: Some(s.start_position.into()),
        hover_altitude: None,
        devices: Some(
            s.devices
                .iter()
                .map(|d| DeviceFile {
                    id: d.id,
                    position: d.position.into(),
                    transmit_power: Some(d.transmit_power),
                    hover_point: Some(d.hover_point.into()),
                })
                .collect(),
        ),
        visit_order: Some(s.visit_order.clone()),
        control: ControlFile {
            slot_length: Some(c.slot_length),
            state_noise_cov: Some(rows_of(&c.state_noise_cov)),
            action_cost_weight: Some(rows_of(&c.action_cost_weight)),
            state_weight: Some(rows_of(&c.state_weight)),
            instability_factor: Some(c.instability_factor),
            v_max: Some(c.v_max),
            u_max: Some(c.u_max),
        },
        channel: ChannelFile {
            carrier_freq: Some(ch.carrier_freq),
            sat_bandwidth: Some(ch.sat_bandwidth),
            ground_bandwidth: Some(ch.ground_bandwidth),
            noise_power: Some(ch.noise_power),
            ref_channel_gain: Some(ch.ref_channel_gain),
            sat_ref_gain: Some(ch.sat_ref_gain),
            sat_altitude: Some(ch.sat_altitude),
            env_a: Some(ch.env_a),
            env_b: Some(ch.env_b),
            excess_loss_los: Some(ch.excess_loss_los),
            excess_loss_nlos: Some(ch.excess_loss_nlos),
            rx_antenna_gain: Some(ch.rx_antenna_gain),
            earth_radius: Some(ch.earth_radius),
            max_elevation_deg: Some(ch.max_elevation_deg),
            min_central_angle_deg: Some(ch.min_central_angle_deg),
            snr_threshold: Some(ch.snr_threshold),
            snr_floor_enabled: Some(ch.snr_floor_enabled),
            light_speed: Some(ch.light_speed),
            ..Default::default()
        },
        energy: EnergyFile {
            kappa1: Some(e.kappa1),
            kappa2: Some(e.kappa2),
            gravity: Some(e.gravity),
            hover_power: Some(e.hover_power),
            sensing_energy: Some(e.sensing_energy),
            v_floor: Some(e.v_floor),
        },
        mission: Some(s.mission.clone()),
        dqn: Some(s.dqn.clone()),
    }
}

/// Greedy nearest-neighbour tour over hover points, starting from `start`.
/// Ties go to the lower device id.
pub fn nearest_neighbor_order(start: &Vector3<f64>, devices: &[GroundDevice]) -> Vec<u32> {
    let mut remaining: Vec<&GroundDevice> = devices.iter().collect();
    remaining.sort_by_key(|d| d.id);
    let mut order = Vec::with_capacity(devices.len());
    let mut here = *start;
    while !remaining.is_empty() {
        let (idx, _) = remaining
            .iter()
            .enumerate()
            .map(|(i, d)| (i, (d.hover_point - here).norm()))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        let next = remaining.remove(idx);
        here = next.hover_point;
        order.push(next.id);
    }
    order
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

fn is_symmetric<const N: usize>(m: &nalgebra::SMatrix<f64, N, N>) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= 1e-12 * scale
}

fn min_eigenvalue<const N: usize>(m: &nalgebra::SMatrix<f64, N, N>) -> f64
where
    nalgebra::Const<N>: nalgebra::DimSub<nalgebra::U1>,
    nalgebra::DefaultAllocator: nalgebra::allocator::Allocator<nalgebra::DimDiff<nalgebra::Const<N>, nalgebra::U1>>,
{
    m.symmetric_eigenvalues().min()
}

/// Lists every violated invariant. Empty iff the scenario is valid.
pub fn validate_scenario(s: &MissionScenario) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut positive = |field: &str, value: f64| {
        if !(value > 0.0 && value.is_finite()) {
            v.push(Violation::new(field, format!("must be positive and finite, got {value}")));
        }
    };

    let c = &s.control;
    positive("control.slot_length", c.slot_length);
    positive("control.v_max", c.v_max);
    positive("control.u_max", c.u_max);

    let ch = &s.channel;
    positive("channel.carrier_freq", ch.carrier_freq);
    positive("channel.sat_bandwidth", ch.sat_bandwidth);
    positive("channel.ground_bandwidth", ch.ground_bandwidth);
    positive("channel.noise_power", ch.noise_power);
    positive("channel.ref_channel_gain", ch.ref_channel_gain);
    positive("channel.sat_ref_gain", ch.sat_ref_gain);
    positive("channel.sat_altitude", ch.sat_altitude);
    positive("channel.env_a", ch.env_a);
    positive("channel.env_b", ch.env_b);
    positive("channel.excess_loss_los", ch.excess_loss_los);
    positive("channel.excess_loss_nlos", ch.excess_loss_nlos);
    positive("channel.rx_antenna_gain", ch.rx_antenna_gain);
    positive("channel.earth_radius", ch.earth_radius);
    positive("channel.snr_threshold", ch.snr_threshold);
    positive("channel.light_speed", ch.light_speed);

    let e = &s.energy;
    positive("energy.kappa1", e.kappa1);
    positive("energy.kappa2", e.kappa2);
    positive("energy.gravity", e.gravity);
    positive("energy.hover_power", e.hover_power);
    positive("energy.sensing_energy", e.sensing_energy);
    positive("energy.v_floor", e.v_floor);

    positive("p_max", s.p_max);

    for d in &s.devices {
        positive(&format!("devices[{}].transmit_power", d.id), d.transmit_power);
    }
    drop(positive);

    if !(c.instability_factor >= 1.0 && c.instability_factor.is_finite()) {
        v.push(Violation::new(
            "control.instability_factor",
            format!("must be >= 1, got {}", c.instability_factor),
        ));
    }
    if !is_symmetric(&c.state_noise_cov) || min_eigenvalue(&c.state_noise_cov) < -1e-12 {
        v.push(Violation::new(
            "control.state_noise_cov",
            "must be symmetric positive semidefinite",
        ));
    }
    if !is_symmetric(&c.action_cost_weight) || min_eigenvalue(&c.action_cost_weight) <= 0.0 {
        v.push(Violation::new(
            "control.action_cost_weight",
            "must be symmetric positive definite",
        ));
    }
    if !is_symmetric(&c.state_weight) || min_eigenvalue(&c.state_weight) <= 0.0 {
        v.push(Violation::new(
            "control.state_weight",
            "must be symmetric positive definite",
        ));
    }

    if ch.excess_loss_nlos < ch.excess_loss_los {
        v.push(Violation::new(
            "channel.excess_loss_nlos",
            format!(
                "NLoS excess loss ({}) must not be below the LoS excess loss ({})",
                ch.excess_loss_nlos, ch.excess_loss_los
            ),
        ));
    }
    if !(0.0..90.0).contains(&ch.min_central_angle_deg) {
        v.push(Violation::new(
            "channel.min_central_angle_deg",
            "must lie in [0, 90) degrees",
        ));
    }
    if !(0.0..=90.0).contains(&ch.max_elevation_deg) {
        v.push(Violation::new(
            "channel.max_elevation_deg",
            "must lie in [0, 90] degrees",
        ));
    }

    if !(s.data_size >= 0.0 && s.data_size.is_finite()) {
        v.push(Violation::new(
            "data_size",
            format!("must be >= 0 bits, got {}", s.data_size),
        ));
    }

    if s.devices.is_empty() {
        v.push(Violation::new("devices", "at least one device is required"));
    }
    let mut ids: Vec<u32> = s.devices.iter().map(|d| d.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        v.push(Violation::new("devices", "device ids must be unique"));
    }
    for d in &s.devices {
        if !(d.position.z >= 0.0) {
            v.push(Violation::new(
                format!("devices[{}].position", d.id),
                "z must be >= 0",
            ));
        }
        if !(d.hover_point.z > 0.0) {
            v.push(Violation::new(
                format!("devices[{}].hover_point", d.id),
                "z must be > 0",
            ));
        }
        if !(d.hover_point.z > d.position.z) {
            v.push(Violation::new(
                format!("devices[{}].hover_point", d.id),
                "must be above the device",
            ));
        }
    }

    let mut order = s.visit_order.clone();
    order.sort_unstable();
    if order != ids {
        v.push(Violation::new(
            "visit_order",
            "must be a permutation of the device ids",
        ));
    }

    let m = &s.mission;
    if m.q_cap == 0 {
        v.push(Violation::new("mission.q_cap", "must be >= 1"));
    }
    if m.search_rollouts == 0 {
        v.push(Violation::new("mission.search_rollouts", "must be >= 1"));
    }
    if m.forced_sensing_interval == Some(0) {
        v.push(Violation::new("mission.forced_sensing_interval", "must be >= 1"));
    }

    v.extend(s.dqn.violations());
    v
}
