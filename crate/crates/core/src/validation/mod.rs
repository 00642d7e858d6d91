//! Independent oracles for the primary algorithms, and a comparison record.
//!
//! Each oracle is a separate, brute-force or closed-form implementation that
//! shares no code with the routine it checks.

pub mod dare_sda;
pub mod power_grid;
pub mod resum;
pub mod root_scan;
pub mod stability;
pub mod value_iteration;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::control::{build_system, solve_dare, spectral_radius};
use crate::error::{Error, Result};
use crate::power::{plan_segment, solve_root_power_for_ratio};
use crate::scenario::MissionScenario;
use crate::sensing::{largest_admissible_interval, max_sensing_interval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub primary: f64,
    pub oracle: f64,
    pub abs_dev: f64,
    pub rel_dev: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub passed: bool,
    /// Reported for inspection only; a failing verdict is expected.
    #[serde(default)]
    pub informational: bool,
}

impl OracleReport {
    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }
}

/// Passes iff `|primary − oracle| ≤ max(abs_tol, rel_tol·|oracle|)`.
pub fn compare(name: &str, primary: f64, oracle: f64, rel_tol: f64, abs_tol: f64) -> Result<OracleReport> {
    if !(rel_tol >= 0.0 && abs_tol >= 0.0) {
        return Err(Error::arg("tolerance", "tolerances must be non-negative"));
    }
    if !primary.is_finite() || !oracle.is_finite() {
        return Err(Error::arg(
            "value",
            format!("{name}: non-finite comparison ({primary} vs {oracle})"),
        ));
    }
    let abs_dev = (primary - oracle).abs();
    let rel_dev = if oracle != 0.0 { abs_dev / oracle.abs() } else if abs_dev == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(OracleReport {
        name: name.to_string(),
        primary,
        oracle,
        abs_dev,
        rel_dev,
        rel_tol,
        abs_tol,
        passed: abs_dev <= abs_tol.max(rel_tol * oracle.abs()),
        informational: false,
    })
}

fn dm(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, data)
}

/// Counts grid points where the closed-form interval bound and the direct
/// stability condition disagree, over `ρ ∈ {0.50, …, 0.99}`,
/// `λ ∈ {1.01, …, 1.50}` and `q ∈ 1..=200`.
pub fn interval_rule_disagreements() -> u64 {
    let mut bad = 0;
    for i in 50..=99 {
        let rho = i as f64 / 100.0;
        for j in 101..=150 {
            let lambda = j as f64 / 100.0;
            let admissible = largest_admissible_interval(max_sensing_interval(rho, lambda), usize::MAX);
            for q in 1..=200u32 {
                let primary = q as usize <= admissible;
                if primary != stability::interval_is_stable(rho, lambda, q) {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// Runs the fast oracle comparisons on the default scenario.
pub fn self_check() -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    let one = dm(1, 1, &[1.0]);
    let (p, _) = solve_dare(&one, &one, &one, &one)?;
    out.push(compare("dare_scalar_golden_ratio", p[(0, 0)], dare_sda::scalar_dare(1.0, 1.0, 1.0, 1.0), 0.0, 1e-6)?);

    let s = MissionScenario::baseline();
    for lambda in [1.0, 1.05, 1.10] {
        let mut cp = s.control.clone();
        cp.instability_factor = lambda;
        let sm = build_system(&cp)?;
        let a = dm(6, 6, sm.a.as_slice());
        let b = dm(6, 3, sm.b.as_slice());
        let p_sda = dare_sda::dare_doubling(
            &a,
            &b,
            &dm(6, 6, cp.state_weight.as_slice()),
            &dm(3, 3, cp.action_cost_weight.as_slice()),
        )?;
        let p = dm(6, 6, sm.p_riccati.as_slice());
        out.push(compare(
            &format!("dare_baseline_lambda_{lambda}"),
            (&p - &p_sda).norm() / p_sda.norm(),
            0.0,
            0.0,
            1e-6,
        )?);
        let closed = &a - &b * dm(3, 6, sm.k.as_slice());
        out.push(compare(
            &format!("closed_loop_spectral_radius_below_one_lambda_{lambda}"),
            if spectral_radius(&closed) < 1.0 { 1.0 } else { 0.0 },
            1.0,
            0.0,
            0.0,
        )?);
    }

    for c in [0.1, 1.0, 10.0] {
        let p = solve_root_power_for_ratio(c)?;
        let scan = root_scan::scan_root(c, 1e-12, 1e6, 1_000_000)
            .ok_or_else(|| Error::BracketNotFound { lo: 1e-12, hi: 1e6 })?;
        out.push(compare(&format!("root_power_c_{c}"), p, scan, 1e-6, 0.0)?);
        out.push(compare(
            &format!("root_power_residual_c_{c}"),
            root_scan::stationarity_gap(c, p),
            0.0,
            0.0,
            1e-12,
        )?);
    }

    out.push(compare("interval_rule_disagreements", interval_rule_disagreements() as f64, 0.0, 0.0, 0.0)?);

    // The stationarity root and the grid maximiser of segment efficiency
    // coincide only when the minimum-rate power dominates, so the pair is
    // reported without gating the check.
    let mut ch = s.channel.clone();
    ch.sat_ref_gain = ch.noise_power * ch.sat_altitude * ch.sat_altitude;
    let flight_time = 20.0;
    let backlog = ch.sat_bandwidth * flight_time * 1.01f64.log2();
    let plan = plan_segment(&ch, 0, backlog, flight_time, 10.0, 100.0)?;
    let grid = power_grid::ee_power_oracle(&ch, backlog, flight_time, 10.0, 100.0, 10_000)?;
    out.push(compare("segment_power_vs_grid", plan.p_final, grid, 1e-3, 0.0)?.informational());

    let ep = &s.energy;
    let coarse = value_iteration::plan_oracle(ep, s.control.slot_length, s.control.v_max, 100.0, value_iteration::OracleGrid { d_step: 0.5 })?;
    let fine = value_iteration::plan_oracle(ep, s.control.slot_length, s.control.v_max, 100.0, value_iteration::OracleGrid { d_step: 0.25 })?;
    out.push(compare("value_iteration_grid_refinement_100m", coarse.energy, fine.energy, 0.02, 0.0)?);
    Ok(out)
}
