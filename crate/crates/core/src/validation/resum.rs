//! Recomputes mission totals from the per-slot CSV alone.

use std::io::Read;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LogTotals {
    pub slots: u64,
    pub energy: f64,
    pub bits_uploaded: f64,
    pub bits_collected: f64,
    pub ee: f64,
}

const ENERGY_COLUMNS: [&str; 4] = ["e_propulsion", "e_hover", "e_sensing", "e_comm"];

/// Sums the energy and bit columns of a mission CSV.
pub fn resum_mission_csv<R: Read>(reader: R) -> Result<LogTotals> {
    let mut rd = csv::Reader::from_reader(reader);
    let headers = rd.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("mission csv lacks column {name}")))
    };
    let energy_cols = ENERGY_COLUMNS
        .iter()
        .map(|c| col(c))
        .collect::<Result<Vec<usize>>>()?;
    let up = col("bits_uploaded")?;
    let down = col("bits_collected")?;
    let mut t = LogTotals::default();
    for row in rd.records() {
        let row = row?;
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", t.slots + 1)))
        };
        for &i in &energy_cols {
            t.energy += num(i)?;
        }
        t.bits_uploaded += num(up)?;
        t.bits_collected += num(down)?;
        t.slots += 1;
    }
    if !(t.energy > 0.0) {
        return Err(Error::Parse("mission csv has no energy".into()));
    }
    t.ee = t.bits_uploaded / t.energy;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_columns() {
        let text = "bits_uploaded,bits_collected,e_propulsion,e_hover,e_sensing,e_comm\n\
                    10,0,1,0,0.5,0.5\n\
                    30,5,0,2,0,0\n";
        let t = resum_mission_csv(text.as_bytes()).unwrap();
        assert_eq!(t.slots, 2);
        assert_eq!(t.energy, 4.0);
        assert_eq!(t.ee, 10.0);
        assert!(resum_mission_csv("slot\n1\n".as_bytes()).is_err());
    }
}
