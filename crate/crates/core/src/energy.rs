//! Per-slot energy accounting and mission energy efficiency.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::EnergyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Flying,
    Hovering,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Flying => "flying",
            Phase::Hovering => "hovering",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotEnergy {
    pub propulsion: f64,
    pub hover: f64,
    pub sensing: f64,
    pub comm: f64,
}

impl SlotEnergy {
    pub fn total(&self) -> f64 {
        self.propulsion + self.hover + self.sensing + self.comm
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub propulsion: f64,
    pub hover: f64,
    pub sensing: f64,
    pub comm: f64,
    pub total_energy: f64,
    pub total_bits_uploaded: f64,
    /// bits/J
    pub ee: f64,
}

/// Speed used by the propulsion model; speeds below `v_floor` are lifted to
/// it. Returns whether the floor applied.
pub fn effective_speed(ep: &EnergyParams, vel: &Vector3<f64>) -> (f64, bool) {
    let v = vel.norm();
    if v < ep.v_floor {
        (ep.v_floor, true)
    } else {
        (v, false)
    }
}

/// Propulsion power at speed `v` (already floored) with acceleration
/// magnitude `u`: `κ1 v³ + (κ2 / v)(1 + u²/g²)`.
pub fn propulsion_power(ep: &EnergyParams, v: f64, u: f64) -> f64 {
    ep.kappa1 * v * v * v + ep.kappa2 / v * (1.0 + u * u / (ep.gravity * ep.gravity))
}

/// Propulsion energy over one slot of length `dt`.
pub fn propulsion_energy(ep: &EnergyParams, vel: &Vector3<f64>, accel: &Vector3<f64>, dt: f64) -> f64 {
    let (v, _) = effective_speed(ep, vel);
    dt * propulsion_power(ep, v, accel.norm())
}

/// Speed minimizing propulsion power at constant acceleration magnitude `u`.
pub fn min_power_speed(ep: &EnergyParams, u: f64) -> f64 {
    (ep.kappa2 * (1.0 + u * u / (ep.gravity * ep.gravity)) / (3.0 * ep.kappa1)).powf(0.25)
}

/// Energy of one slot. Flying and hovering are exclusive: flight pays
/// propulsion, hover pays `P_h δ`.
pub fn slot_energy(
    phase: Phase,
    sensed: bool,
    power: f64,
    vel: &Vector3<f64>,
    accel: &Vector3<f64>,
    ep: &EnergyParams,
    dt: f64,
) -> SlotEnergy {
    let (propulsion, hover) = match phase {
        Phase::Flying => (propulsion_energy(ep, vel, accel, dt), 0.0),
        Phase::Hovering => (0.0, ep.hover_power * dt),
    };
    SlotEnergy {
        propulsion,
        hover,
        sensing: if sensed { ep.sensing_energy } else { 0.0 },
        comm: power * dt,
    }
}

/// Energy efficiency over a sequence of `(slot energy, bits uploaded)`.
pub fn energy_efficiency<I>(slots: I) -> Result<EnergyReport>
where
    I: IntoIterator<Item = (SlotEnergy, f64)>,
{
    let mut r = EnergyReport::default();
    for (e, bits) in slots {
        r.propulsion += e.propulsion;
        r.hover += e.hover;
        r.sensing += e.sensing;
        r.comm += e.comm;
        r.total_bits_uploaded += bits;
    }
    r.total_energy = r.propulsion + r.hover + r.sensing + r.comm;
    if !(r.total_energy > 0.0) {
        return Err(Error::arg("log", "energy efficiency needs positive total energy"));
    }
    r.ee = r.total_bits_uploaded / r.total_energy;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::MissionScenario;

    fn ep() -> EnergyParams {
        MissionScenario::baseline().energy
    }

    #[test]
    fn propulsion_examples() {
        let ep = ep();
        let v = Vector3::new(10.0, 0.0, 0.0);
        let e = propulsion_energy(&ep, &v, &Vector3::zeros(), 0.1);
        assert!((e - 22.5926).abs() < 1e-9);
        let g = Vector3::new(0.0, ep.gravity, 0.0);
        assert!((propulsion_energy(&ep, &v, &g, 0.1) - 45.0926).abs() < 1e-9);
        assert_eq!(
            propulsion_energy(&ep, &(-v), &g, 0.1),
            propulsion_energy(&ep, &v, &g, 0.1)
        );
    }

    #[test]
    fn floor_applies_near_zero() {
        let ep = ep();
        let slow = propulsion_energy(&ep, &Vector3::new(0.01, 0.0, 0.0), &Vector3::zeros(), 0.1);
        let floor = propulsion_energy(&ep, &Vector3::new(0.1, 0.0, 0.0), &Vector3::zeros(), 0.1);
        assert_eq!(slow, floor);
        assert!(effective_speed(&ep, &Vector3::zeros()).1);
    }

    #[test]
    fn slot_energy_examples() {
        let ep = ep();
        let z = Vector3::zeros();
        let h = slot_energy(Phase::Hovering, false, 0.0, &z, &z, &ep, 0.1);
        assert_eq!(h, SlotEnergy { hover: 10.0, ..Default::default() });
        let v = Vector3::new(5.0, 0.0, 0.0);
        let f = slot_energy(Phase::Flying, true, 2.0, &v, &z, &ep, 0.1);
        assert!((f.comm - 0.2).abs() < 1e-15);
        assert_eq!(f.sensing, ep.sensing_energy);
        assert_eq!(f.hover, 0.0);
    }

    #[test]
    fn efficiency_examples() {
        let e = SlotEnergy { propulsion: 3.0, hover: 1.0, sensing: 0.5, comm: 0.5 };
        let none = energy_efficiency(vec![(e, 0.0); 3]).unwrap();
        assert_eq!(none.ee, 0.0);
        let base = energy_efficiency(vec![(e, 10.0); 3]).unwrap();
        let doubled = SlotEnergy {
            propulsion: 6.0,
            hover: 2.0,
            sensing: 1.0,
            comm: 1.0,
        };
        let half = energy_efficiency(vec![(doubled, 10.0); 3]).unwrap();
        assert!((half.ee * 2.0 - base.ee).abs() < 1e-15);
        assert_eq!(
            base.total_energy,
            base.propulsion + base.hover + base.sensing + base.comm
        );
        assert!(energy_efficiency(vec![(SlotEnergy::default(), 1.0)]).is_err());
    }

    #[test]
    fn numeric_minimizer_matches_closed_form() {
        let ep = ep();
        for u in [0.0, 3.0, 9.8] {
            let mut best = (f64::INFINITY, 0.0);
            let mut v = 1.0;
            while v < 80.0 {
                let p = propulsion_power(&ep, v, u);
                if p < best.0 {
                    best = (p, v);
                }
                v += 0.001;
            }
            let closed = min_power_speed(&ep, u);
            assert!((best.1 / closed - 1.0).abs() < 0.01);
        }
    }
}
