//! Uplink power allocation for one flight segment.
//!
//! The transmit power is the root of the stationarity equation
//!
//! ```text
//! log2(exp(g_s / (σ² + P g_s))) = log2(1 + P g_s / σ²)
//! ```
//!
//! raised to the minimum power that uploads the segment's backlog within the
//! flight time, then capped at `p_max`. When even `p_max` is too weak the
//! upload continues while hovering at the next point.
//!
//! The stationarity equation is implemented as written. It does not coincide
//! with the zero of d(R/P)/dP, so [`ee_power_oracle`] searches the true
//! objective independently and the two are reported side by side.

use serde::{Deserialize, Serialize};

use crate::channel::{sat_channel_gain, sat_rate};
use crate::error::{Error, Result};
use crate::scenario::ChannelParams;

pub use crate::validation::power_grid::ee_power_oracle;

pub const ROOT_BRACKET: (f64, f64) = (1e-12, 1e6);
pub const ROOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub segment_id: usize,
    /// Seconds.
    pub flight_time: f64,
    pub p_root: f64,
    pub p_min: f64,
    pub p_final: f64,
    /// Seconds of hover needed after the flight to finish the upload at
    /// `p_final`; zero when the flight is long enough.
    pub extra_hover: f64,
    /// Energy of the segment that does not depend on the transmit power, J.
    pub fixed_energy: f64,
}

/// Left minus right side of the stationarity equation, as a function of
/// `c = g_s / σ²` and the power `p`.
pub fn root_difference(c: f64, p: f64) -> f64 {
    let cp = c * p;
    (c / (1.0 + cp) - cp.ln_1p()) / std::f64::consts::LN_2
}

pub fn solve_root_power(ch: &ChannelParams) -> Result<f64> {
    solve_root_power_for_ratio(sat_channel_gain(ch) / ch.noise_power)
}

/// Bisection for the unique sign change of [`root_difference`] inside
/// [`ROOT_BRACKET`], run until the bracket stops shrinking in floating point
/// so the residual ends well inside [`ROOT_TOLERANCE`].
pub fn solve_root_power_for_ratio(c: f64) -> Result<f64> {
    let (mut lo, mut hi) = ROOT_BRACKET;
    let not_found = || Error::BracketNotFound { lo: ROOT_BRACKET.0, hi: ROOT_BRACKET.1 };
    if !(c > 0.0 && c.is_finite()) {
        return Err(not_found());
    }
    let (f_lo, f_hi) = (root_difference(c, lo), root_difference(c, hi));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(not_found());
    }
    let mut best = (f_lo.abs(), lo);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = root_difference(c, mid);
        if f.abs() < best.0 {
            best = (f.abs(), mid);
        }
        if f == 0.0 {
            return Ok(mid);
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.1)
}

/// Lowest power that sustains `data_bits / flight_time` bits/s.
pub fn min_rate_power(ch: &ChannelParams, data_bits: f64, flight_time: f64) -> Result<f64> {
    if !(flight_time > 0.0) {
        return Err(Error::arg("flight_time", "must be positive"));
    }
    let r_min = data_bits / flight_time;
    Ok(((r_min / ch.sat_bandwidth).exp2() - 1.0) * ch.noise_power / sat_channel_gain(ch))
}

pub fn plan_segment(
    ch: &ChannelParams,
    segment_id: usize,
    data_bits: f64,
    flight_time: f64,
    p_max: f64,
    fixed_energy: f64,
) -> Result<SegmentPlan> {
    let p_root = solve_root_power(ch)?;
    let p_min = min_rate_power(ch, data_bits, flight_time)?;
    let p_final = p_root.max(p_min).min(p_max);
    let extra_hover = if p_max < p_min {
        (data_bits / sat_rate(ch, p_max) - flight_time).max(0.0)
    } else {
        0.0
    };
    Ok(SegmentPlan {
        segment_id,
        flight_time,
        p_root,
        p_min,
        p_final,
        extra_hover,
        fixed_energy,
    })
}
