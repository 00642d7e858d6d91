//! Link models: the UAV-to-satellite uplink, the ground-device-to-UAV
//! air-to-ground link, the satellite propagation delay and the sensing
//! success probability.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::scenario::{ChannelParams, GroundDevice};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub los_prob: f64,
    pub avg_path_loss: f64,
    pub snr: f64,
    /// bits/s
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    pub tau_max: f64,
    pub delta_slots: usize,
}

/// Uplink channel gain `g_s = g_ref / H_s²`. The UAV altitude is neglected
/// against the satellite altitude.
pub fn sat_channel_gain(ch: &ChannelParams) -> f64 {
    ch.sat_ref_gain / (ch.sat_altitude * ch.sat_altitude)
}

/// Uplink rate `B_s log2(1 + p g_s / σ²)` in bits/s.
pub fn sat_rate(ch: &ChannelParams, p: f64) -> f64 {
    let snr = p * sat_channel_gain(ch) / ch.noise_power;
    if ch.snr_floor_enabled && snr < ch.snr_threshold {
        return 0.0;
    }
    ch.sat_bandwidth * snr.ln_1p() / std::f64::consts::LN_2
}

/// Elevation angle of the UAV seen from the device, in degrees. Directly
/// overhead is 90°.
pub fn elevation_deg(uav_pos: &Vector3<f64>, dev_pos: &Vector3<f64>) -> f64 {
    let dz = uav_pos.z - dev_pos.z;
    let dh = (uav_pos.xy() - dev_pos.xy()).norm();
    if dh == 0.0 {
        return if dz >= 0.0 { 90.0 } else { -90.0 };
    }
    dz.atan2(dh).to_degrees()
}

/// Logistic LoS model `1 / (1 + a exp(−b(φ − a)))` with φ in degrees.
pub fn los_probability_at(ch: &ChannelParams, elevation_deg: f64) -> f64 {
    1.0 / (1.0 + ch.env_a * (-ch.env_b * (elevation_deg - ch.env_a)).exp())
}

pub fn los_probability(ch: &ChannelParams, uav_pos: &Vector3<f64>, dev_pos: &Vector3<f64>) -> f64 {
    los_probability_at(ch, elevation_deg(uav_pos, dev_pos))
}

/// Free-space loss `(4π f_c d / c)²` at distance `d`.
fn free_space_loss(ch: &ChannelParams, d: f64) -> f64 {
    let x = 4.0 * std::f64::consts::PI * ch.carrier_freq * d / ch.light_speed;
    x * x
}

pub fn ground_link_budget(
    ch: &ChannelParams,
    uav_pos: &Vector3<f64>,
    dev: &GroundDevice,
) -> Result<LinkBudget> {
    let d = (uav_pos - dev.position).norm();
    if !(d > 0.0) {
        return Err(Error::arg(
            "uav_pos",
            format!("coincides with device {}", dev.id),
        ));
    }
    let los_prob = los_probability(ch, uav_pos, &dev.position);
    let fs = free_space_loss(ch, d);
    let l_los = fs * ch.excess_loss_los;
    let l_nlos = fs * ch.excess_loss_nlos;
    let avg_path_loss = los_prob * l_los + (1.0 - los_prob) * l_nlos;
    let snr = ch.rx_antenna_gain * dev.transmit_power / (avg_path_loss * ch.noise_power);
    let rate = if ch.snr_floor_enabled && snr < ch.snr_threshold {
        0.0
    } else {
        ch.ground_bandwidth * snr.ln_1p() / std::f64::consts::LN_2
    };
    Ok(LinkBudget {
        los_prob,
        avg_path_loss,
        snr,
        rate,
    })
}

/// Worst-case one-way propagation delay through the satellite and the
/// resulting round-trip delay in whole slots.
pub fn propagation_delay(ch: &ChannelParams, slot_length: f64) -> Result<DelayModel> {
    let cos_phi = ch.min_central_angle_deg.to_radians().cos();
    if cos_phi.abs() < 1e-12 {
        return Err(Error::arg(
            "min_central_angle_deg",
            "90° makes the delay bound infinite",
        ));
    }
    if !(slot_length > 0.0) {
        return Err(Error::arg("slot_length", "must be positive"));
    }
    let tau_max = (ch.earth_radius + ch.sat_altitude) * ch.max_elevation_deg.to_radians().sin()
        / (ch.light_speed * cos_phi);
    let delta_slots = (2.0 * tau_max / slot_length).floor().max(0.0) as usize;
    Ok(DelayModel {
        tau_max,
        delta_slots,
    })
}

/// Probability that a sensing attempt at `uav_pos` reaches the controller:
/// the best LoS probability over all devices.
pub fn success_probability(
    ch: &ChannelParams,
    uav_pos: &Vector3<f64>,
    devices: &[GroundDevice],
) -> Result<f64> {
    devices
        .iter()
        .map(|d| los_probability(ch, uav_pos, &d.position))
        .fold(None, |best: Option<f64>, p| Some(best.map_or(p, |b| b.max(p))))
        .ok_or_else(|| Error::arg("devices", "success probability needs at least one device"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::MissionScenario;

    fn ch() -> ChannelParams {
        MissionScenario::baseline().channel
    }

    fn device_at(x: f64, y: f64) -> GroundDevice {
        GroundDevice {
            id: 0,
            position: Vector3::new(x, y, 0.0),
            transmit_power: 0.1,
            hover_point: Vector3::new(x, y, 100.0),
        }
    }

    #[test]
    fn sat_gain_examples() {
        let mut c = ch();
        c.sat_ref_gain = 1.0;
        c.sat_altitude = 1.0;
        assert_eq!(sat_channel_gain(&c), 1.0);
        c.sat_ref_gain = 1e-8;
        c.sat_altitude = 1e6;
        assert!((sat_channel_gain(&c) - 1e-20).abs() < 1e-32);
        let g = sat_channel_gain(&c);
        c.sat_altitude = 2e6;
        assert!((sat_channel_gain(&c) - g / 4.0).abs() < 1e-33);
    }

    #[test]
    fn sat_rate_examples() {
        let mut c = ch();
        assert_eq!(sat_rate(&c, 0.0), 0.0);
        // p g_s / σ² = 1 at p = 10 W by default calibration
        c.sat_bandwidth = 1.0;
        assert!((sat_rate(&c, 10.0) - 1.0).abs() < 1e-12);
        c.sat_bandwidth = 5e6;
        assert!((sat_rate(&c, 30.0) - 1e7).abs() < 1e-3);
    }

    #[test]
    fn los_examples() {
        let c = ch();
        assert!((los_probability_at(&c, c.env_a) - 1.0 / (1.0 + 9.61)).abs() < 1e-15);
        assert!((los_probability_at(&c, 90.0) - 0.999975).abs() < 1e-6);
        let dev = Vector3::zeros();
        let far = los_probability(&c, &Vector3::new(300.0, 0.0, 100.0), &dev);
        let near = los_probability(&c, &Vector3::new(50.0, 0.0, 100.0), &dev);
        let over = los_probability(&c, &Vector3::new(0.0, 0.0, 100.0), &dev);
        assert!(far < near && near < over);
    }

    #[test]
    fn overhead_rate_near_eight_megabit() {
        let c = ch();
        let lb = ground_link_budget(&c, &Vector3::new(0.0, 0.0, 100.0), &device_at(0.0, 0.0)).unwrap();
        assert!((lb.rate / 8e6 - 1.0).abs() < 0.05, "{}", lb.rate);
    }

    #[test]
    fn equal_excess_loss_ignores_los() {
        let mut c = ch();
        c.excess_loss_nlos = c.excess_loss_los;
        let dev = device_at(0.0, 0.0);
        let pos = Vector3::new(120.0, 40.0, 80.0);
        let lb = ground_link_budget(&c, &pos, &dev).unwrap();
        let expected = free_space_loss(&c, pos.norm()) * c.excess_loss_los;
        assert!((lb.avg_path_loss / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_drops_with_distance_at_fixed_elevation() {
        let c = ch();
        let dev = device_at(0.0, 0.0);
        let mut last = f64::INFINITY;
        for scale in [1.0, 2.0, 4.0, 8.0] {
            let pos = Vector3::new(60.0 * scale, 0.0, 80.0 * scale);
            let r = ground_link_budget(&c, &pos, &dev).unwrap().rate;
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn coincident_is_error() {
        let c = ch();
        assert!(ground_link_budget(&c, &Vector3::zeros(), &device_at(0.0, 0.0)).is_err());
    }

    #[test]
    fn delay_examples() {
        let mut c = ch();
        let d = propagation_delay(&c, 0.1).unwrap();
        assert!((d.tau_max - 0.01911).abs() < 1e-5, "{}", d.tau_max);
        assert_eq!(d.delta_slots, 0);
        assert_eq!(propagation_delay(&c, 0.01).unwrap().delta_slots, 3);
        c.max_elevation_deg = 0.0;
        let d = propagation_delay(&c, 0.1).unwrap();
        assert_eq!((d.tau_max, d.delta_slots), (0.0, 0));
        c.min_central_angle_deg = 90.0;
        assert!(propagation_delay(&c, 0.1).is_err());
    }

    #[test]
    fn success_probability_takes_best_device() {
        let c = ch();
        let uav = Vector3::new(0.0, 0.0, 100.0);
        let low = device_at(100.0 / 10f64.to_radians().tan(), 0.0);
        let high = device_at(100.0 / 80f64.to_radians().tan(), 0.0);
        let rho = success_probability(&c, &uav, &[low.clone(), high.clone()]).unwrap();
        assert!((rho - los_probability_at(&c, 80.0)).abs() < 1e-9);
        let single = success_probability(&c, &uav, &[low.clone()]).unwrap();
        assert_eq!(single, los_probability(&c, &uav, &low.position));
        assert!(success_probability(&c, &uav, &[]).is_err());
        let over = success_probability(&c, &uav, &[device_at(0.0, 0.0)]).unwrap();
        assert!((over - los_probability_at(&c, 90.0)).abs() < 1e-15);
    }
}
