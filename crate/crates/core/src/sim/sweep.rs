//! One-parameter sweeps over independent missions.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::{run_mission, MissionResult, PlannerSource};
use crate::error::{Error, Result};
use crate::scenario::MissionScenario;

pub const SWEEP_SCHEMA: &str = "satuav.sweep.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lambda,
    DataSize,
    PMax,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::DataSize => "data_size",
            SweepAxis::PMax => "p_max",
        }
    }

    pub fn apply(&self, s: &mut MissionScenario, value: f64) {
        match self {
            SweepAxis::Lambda => s.control.instability_factor = value,
            SweepAxis::DataSize => s.data_size = value,
            SweepAxis::PMax => s.p_max = value,
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        match text {
            "lambda" => Ok(SweepAxis::Lambda),
            "data_size" => Ok(SweepAxis::DataSize),
            "p_max" => Ok(SweepAxis::PMax),
            other => Err(Error::arg(
                "axis",
                format!("unknown axis {other:?}; expected lambda, data_size or p_max"),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    /// The mission result, or the error message of a failed run.
    pub outcome: std::result::Result<MissionResult, String>,
}

impl SweepRow {
    fn metrics(&self) -> Vec<(&'static str, f64)> {
        match &self.outcome {
            Ok(r) => vec![
                ("ee", r.ee),
                ("total_energy", r.energy.total_energy),
                ("propulsion", r.energy.propulsion),
                ("hover", r.energy.hover),
                ("sensing", r.energy.sensing),
                ("comm", r.energy.comm),
                ("bits_uploaded", r.bits_uploaded),
                ("tracking_error", r.tracking_error),
                ("flight_sensing_density", r.flight_sensing_density),
                ("hover_sensing_density", r.hover_sensing_density),
                ("sensing_attempts", r.sensing_attempts as f64),
                ("slots", r.slots as f64),
                ("audit_passed", if r.audit_passed { 1.0 } else { 0.0 }),
            ],
            Err(_) => Vec::new(),
        }
    }
}

/// Runs one mission per value, in parallel, returning rows in input order.
/// The scenario with the swept value must validate; otherwise that row
/// fails.
pub fn run_sweep(
    base: &MissionScenario,
    planner: &PlannerSource,
    axis: SweepAxis,
    values: &[f64],
    seed: u64,
) -> Vec<SweepRow> {
    values
        .par_iter()
        .map(|&value| {
            let mut s = base.clone();
            axis.apply(&mut s, value);
            let outcome = run_mission(&s, planner, seed)
                .map(|run| run.result)
                .map_err(|e| e.to_string());
            SweepRow {
                axis,
                value,
                outcome,
            }
        })
        .collect()
}

/// Tidy form: one row per (value, metric); failed runs get a single row
/// with an empty metric and the error as status.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["schema", "axis", "value", "metric", "metric_value", "status"])?;
    for row in rows {
        match &row.outcome {
            Ok(_) => {
                for (name, v) in row.metrics() {
                    wr.write_record([
                        SWEEP_SCHEMA.to_string(),
                        row.axis.as_str().to_string(),
                        format!("{}", row.value),
                        name.to_string(),
                        format!("{v}"),
                        "ok".to_string(),
                    ])?;
                }
            }
            Err(e) => {
                wr.write_record([
                    SWEEP_SCHEMA.to_string(),
                    row.axis.as_str().to_string(),
                    format!("{}", row.value),
                    String::new(),
                    String::new(),
                    format!("error: {e}"),
                ])?;
            }
        }
    }
    wr.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validation::value_iteration::OracleGrid;

    #[test]
    fn failed_rows_are_kept_in_order() {
        let mut s = MissionScenario::baseline();
        s.devices.truncate(2);
        s.visit_order = vec![s.devices[0].id, s.devices[1].id];
        s.data_size = 1e6;
        s.mission.search_rollouts = 1;
        let rows = run_sweep(
            &s,
            &PlannerSource::Oracle(OracleGrid::default()),
            SweepAxis::Lambda,
            &[0.5, 1.05],
            1,
        );
        assert_eq!(rows.len(), 2);
        assert!(rows[0].outcome.is_err());
        assert!(rows[1].outcome.is_ok(), "{:?}", rows[1].outcome.as_ref().err());
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("error"));
    }

    #[test]
    fn axis_names_round_trip() {
        for a in [SweepAxis::Lambda, SweepAxis::DataSize, SweepAxis::PMax] {
            assert_eq!(a.as_str().parse::<SweepAxis>().unwrap(), a);
        }
        assert!("speed".parse::<SweepAxis>().is_err());
    }
}
