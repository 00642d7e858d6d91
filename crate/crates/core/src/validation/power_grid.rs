//! Exhaustive search of the segment energy-efficiency objective over a
//! log-spaced power grid.

use crate::error::{Error, Result};
use crate::scenario::ChannelParams;

/// Floor of the search range when the minimum power is zero.
const P_FLOOR: f64 = 1e-12;

fn uplink_rate(ch: &ChannelParams, p: f64) -> f64 {
    let g = ch.sat_ref_gain / ch.sat_altitude.powi(2);
    ch.sat_bandwidth * (1.0 + p * g / ch.noise_power).log2()
}

fn lowest_feasible_power(ch: &ChannelParams, data_bits: f64, flight_time: f64) -> f64 {
    let g = ch.sat_ref_gain / ch.sat_altitude.powi(2);
    (2f64.powf(data_bits / (flight_time * ch.sat_bandwidth)) - 1.0) * ch.noise_power / g
}

/// Segment energy efficiency at power `p`: the backlog divided by the
/// energy spent uploading it at `p` plus the power-independent energy.
pub fn segment_efficiency(ch: &ChannelParams, data_bits: f64, p: f64, fixed_energy: f64) -> f64 {
    let rate = uplink_rate(ch, p);
    let comm = if data_bits > 0.0 { p * data_bits / rate } else { 0.0 };
    data_bits / (comm + fixed_energy)
}

/// Argmax of [`segment_efficiency`] over `grid_points` log-spaced powers in
/// `[P_min, p_max]`, where `P_min` uploads the backlog exactly within the
/// flight. Ties go to the lowest power.
pub fn ee_power_oracle(
    ch: &ChannelParams,
    data_bits: f64,
    flight_time: f64,
    p_max: f64,
    fixed_energy: f64,
    grid_points: usize,
) -> Result<f64> {
    if grid_points < 100 {
        return Err(Error::arg("grid_points", "at least 100 points are required"));
    }
    if !(flight_time > 0.0) {
        return Err(Error::arg("flight_time", "must be positive"));
    }
    let p_min = lowest_feasible_power(ch, data_bits, flight_time);
    if p_max < p_min {
        return Err(Error::Infeasible(format!(
            "p_max {p_max} W is below the minimum upload power {p_min} W; the upload must extend into hover"
        )));
    }
    let lo = p_min.max(P_FLOOR).min(p_max);
    let ratio = (p_max / lo).ln();
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..grid_points {
        let p = if i == 0 {
            lo
        } else if i == grid_points - 1 {
            p_max
        } else {
            lo * (ratio * i as f64 / (grid_points - 1) as f64).exp()
        };
        let f = segment_efficiency(ch, data_bits, p, fixed_energy);
        if f > best.0 {
            best = (f, p);
        }
    }
    Ok(best.1)
}
