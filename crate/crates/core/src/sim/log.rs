//! Per-slot mission records and their CSV form.

use std::io::Write;

use nalgebra::{Vector3, Vector6};

use crate::energy::{energy_efficiency, EnergyReport, Phase, SlotEnergy};
use crate::error::{Error, Result};

pub const MISSION_SCHEMA: &str = "satuav.mission.v1";
pub const SENSING_SCHEMA: &str = "satuav.sensing.v1";

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub phase: Phase,
    /// Index of the leg (flight or hover) this slot belongs to.
    pub leg: usize,
    /// Device being flown to or served; `None` on the final legs.
    pub target: Option<u32>,
    /// Device transmitting to the UAV this slot.
    pub collecting: Option<u32>,
    /// True state at the start of the slot.
    pub state: Vector6<f64>,
    /// Controller's estimate of the state at the start of the slot.
    pub remote_state: Vector6<f64>,
    pub reference: Vector6<f64>,
    pub accel: Vector3<f64>,
    pub accel_clamped: bool,
    /// True state at the end of the slot.
    pub state_next: Vector6<f64>,
    pub gamma: bool,
    pub sensed_ok: bool,
    pub received: bool,
    pub aoi: u64,
    pub rho: f64,
    pub q_max: f64,
    /// Interval the current leg senses at.
    pub interval: usize,
    pub power: f64,
    pub sat_rate: f64,
    pub ground_rate: f64,
    pub bits_uploaded: f64,
    pub bits_collected: f64,
    pub cum_uploaded: f64,
    pub cum_collected: f64,
    /// Cumulative bits collected per device, in `MissionLog::device_ids`
    /// order.
    pub collected_by_device: Vec<f64>,
    pub energy: SlotEnergy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionLog {
    pub device_ids: Vec<u32>,
    pub slot_length: f64,
    pub data_size: f64,
    pub p_max: f64,
    pub v_max: f64,
    pub u_max: f64,
    pub delta_slots: usize,
    pub records: Vec<SlotRecord>,
}

fn f(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<u32>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn b(v: bool) -> &'static str {
    if v {
        "1"
    } else {
        "0"
    }
}

impl MissionLog {
    pub fn energy_report(&self) -> Result<EnergyReport> {
        energy_efficiency(self.records.iter().map(|r| (r.energy, r.bits_uploaded)))
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "schema", "slot", "time", "phase", "leg", "target", "collecting", "px", "py", "pz",
            "vx", "vy", "vz", "remote_px", "remote_py", "remote_pz", "remote_vx", "remote_vy",
            "remote_vz", "ref_px", "ref_py", "ref_pz", "ref_vx", "ref_vy", "ref_vz", "ax", "ay",
            "az", "accel_clamped", "gamma", "sensed_ok", "received", "aoi", "rho", "q_max",
            "interval", "power", "sat_rate", "ground_rate", "bits_uploaded", "bits_collected",
            "cum_uploaded", "cum_collected", "e_propulsion", "e_hover", "e_sensing", "e_comm",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend(self.device_ids.iter().map(|id| format!("collected_dev{id}")));
        h
    }

    fn row(&self, r: &SlotRecord) -> Vec<String> {
        let mut row = vec![
            MISSION_SCHEMA.to_string(),
            r.slot.to_string(),
            f(r.slot as f64 * self.slot_length),
            r.phase.as_str().to_string(),
            r.leg.to_string(),
            opt(r.target),
            opt(r.collecting),
        ];
        row.extend(r.state.iter().map(|v| f(*v)));
        row.extend(r.remote_state.iter().map(|v| f(*v)));
        row.extend(r.reference.iter().map(|v| f(*v)));
        row.extend(r.accel.iter().map(|v| f(*v)));
        row.extend(
            [b(r.accel_clamped), b(r.gamma), b(r.sensed_ok), b(r.received)]
                .iter()
                .map(|s| s.to_string()),
        );
        row.push(r.aoi.to_string());
        row.push(f(r.rho));
        row.push(f(r.q_max));
        row.push(r.interval.to_string());
        for v in [
            r.power,
            r.sat_rate,
            r.ground_rate,
            r.bits_uploaded,
            r.bits_collected,
            r.cum_uploaded,
            r.cum_collected,
            r.energy.propulsion,
            r.energy.hover,
            r.energy.sensing,
            r.energy.comm,
        ] {
            row.push(f(v));
        }
        row.extend(r.collected_by_device.iter().map(|v| f(*v)));
        row
    }

    /// One row per slot; column order as in [`MissionLog::header`].
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.header())?;
        for r in &self.records {
            wr.write_record(self.row(r))?;
        }
        wr.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Sensing decisions, age of information and the interval bound per
    /// slot.
    pub fn write_sensing_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "schema", "slot", "time", "phase", "leg", "gamma", "sensed_ok", "received", "aoi",
            "rho", "q_max", "interval",
        ])?;
        for r in &self.records {
            wr.write_record([
                SENSING_SCHEMA.to_string(),
                r.slot.to_string(),
                f(r.slot as f64 * self.slot_length),
                r.phase.as_str().to_string(),
                r.leg.to_string(),
                b(r.gamma).to_string(),
                b(r.sensed_ok).to_string(),
                b(r.received).to_string(),
                r.aoi.to_string(),
                f(r.rho),
                f(r.q_max),
                r.interval.to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}
