//! Post-hoc check of the mission constraints on a finished log.
//!
//! - C1: sensing decisions are binary.
//! - C2: uploads never exceed what was collected, and everything collected
//!   is uploaded by the end.
//! - C3: every device delivers its full data size.
//! - C4: uplink power within `[0, p_max]`.
//! - C5: speed within `v_max`.
//! - C6: acceleration within `u_max`.
//! - C7: every sensing gap is below the stability bound at the slot it
//!   starts (a gap of one slot is always admissible).

use serde::{Deserialize, Serialize};

use super::log::MissionLog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub constraint: String,
    pub passed: bool,
    /// First violating slot.
    pub witness_slot: Option<u64>,
    pub detail: String,
}

impl AuditEntry {
    fn pass(c: &str) -> Self {
        Self {
            constraint: c.into(),
            passed: true,
            witness_slot: None,
            detail: String::new(),
        }
    }

    fn fail(c: &str, slot: u64, detail: String) -> Self {
        Self {
            constraint: c.into(),
            passed: false,
            witness_slot: Some(slot),
            detail,
        }
    }
}

/// Tolerance on bit bookkeeping: one part in 1e9 of the data size.
pub fn bit_tolerance(data_size: f64) -> f64 {
    1e-9 * (1.0 + data_size)
}

pub fn audit(log: &MissionLog) -> Vec<AuditEntry> {
    let tol_bits = bit_tolerance(log.data_size) * log.device_ids.len().max(1) as f64;
    let rel = 1e-9;
    let mut out = Vec::with_capacity(7);

    // C1 holds by type; the check stays so the audit lists every constraint.
    out.push(AuditEntry::pass("C1"));

    let mut c2 = None;
    for r in &log.records {
        if r.cum_uploaded > r.cum_collected + tol_bits {
            c2 = Some(AuditEntry::fail(
                "C2",
                r.slot,
                format!(
                    "uploaded {} bits exceeds collected {} bits",
                    r.cum_uploaded, r.cum_collected
                ),
            ));
            break;
        }
    }
    if c2.is_none() {
        if let Some(last) = log.records.last() {
            if (last.cum_uploaded - last.cum_collected).abs() > tol_bits {
                c2 = Some(AuditEntry::fail(
                    "C2",
                    last.slot,
                    format!(
                        "mission ended with {} of {} collected bits uploaded",
                        last.cum_uploaded, last.cum_collected
                    ),
                ));
            }
        }
    }
    out.push(c2.unwrap_or_else(|| AuditEntry::pass("C2")));

    let c3 = match log.records.last() {
        Some(last) => last
            .collected_by_device
            .iter()
            .zip(&log.device_ids)
            .find(|(c, _)| (*c - log.data_size).abs() > bit_tolerance(log.data_size))
            .map(|(c, id)| {
                AuditEntry::fail(
                    "C3",
                    last.slot,
                    format!("device {id} delivered {c} of {} bits", log.data_size),
                )
            }),
        None if log.data_size > 0.0 => Some(AuditEntry::fail("C3", 0, "empty log".into())),
        None => None,
    };
    out.push(c3.unwrap_or_else(|| AuditEntry::pass("C3")));

    let c4 = log
        .records
        .iter()
        .find(|r| !(r.power >= 0.0 && r.power <= log.p_max * (1.0 + rel)))
        .map(|r| AuditEntry::fail("C4", r.slot, format!("power {} W outside [0, {}]", r.power, log.p_max)));
    out.push(c4.unwrap_or_else(|| AuditEntry::pass("C4")));

    let c5 = log
        .records
        .iter()
        .find(|r| {
            let v = r.state_next.fixed_rows::<3>(3).norm();
            !(v <= log.v_max * (1.0 + rel))
        })
        .map(|r| AuditEntry::fail("C5", r.slot, format!("speed above {} m/s", log.v_max)));
    out.push(c5.unwrap_or_else(|| AuditEntry::pass("C5")));

    let c6 = log
        .records
        .iter()
        .find(|r| !(r.accel.norm() <= log.u_max * (1.0 + rel)))
        .map(|r| {
            AuditEntry::fail(
                "C6",
                r.slot,
                format!("acceleration {} above {} m/s²", r.accel.norm(), log.u_max),
            )
        });
    out.push(c6.unwrap_or_else(|| AuditEntry::pass("C6")));

    let mut c7 = None;
    let sensing: Vec<usize> = log
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.gamma)
        .map(|(i, _)| i)
        .collect();
    for w in sensing.windows(2) {
        let r = &log.records[w[0]];
        let gap = (log.records[w[1]].slot - r.slot) as f64;
        if gap > 1.0 && !(gap < r.q_max) {
            c7 = Some(AuditEntry::fail(
                "C7",
                r.slot,
                format!("sensing gap of {gap} slots is not below the bound {}", r.q_max),
            ));
            break;
        }
    }
    out.push(c7.unwrap_or_else(|| AuditEntry::pass("C7")));
    out
}
