//! Dense scan for the sign change of the power stationarity equation.

/// `log2(exp(c/(1 + cP))) − log2(1 + cP)`, written out independently.
pub fn stationarity_gap(c: f64, p: f64) -> f64 {
    (c / (1.0 + c * p)).exp().log2() - (1.0 + c * p).log2()
}

/// Scans `points` log-spaced powers in `[lo, hi]` and returns the linearly
/// interpolated zero of the first sign change, if any.
pub fn scan_root(c: f64, lo: f64, hi: f64, points: usize) -> Option<f64> {
    let step = (hi / lo).ln() / (points - 1) as f64;
    let mut prev_p = lo;
    let mut prev_f = stationarity_gap(c, lo);
    for i in 1..points {
        let p = lo * (step * i as f64).exp();
        let f = stationarity_gap(c, p);
        if prev_f == 0.0 {
            return Some(prev_p);
        }
        if prev_f.signum() != f.signum() {
            return Some(prev_p + (p - prev_p) * prev_f / (prev_f - f));
        }
        prev_p = p;
        prev_f = f;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_unit_ratio_root() {
        let r = scan_root(1.0, 1e-12, 1e6, 100_000).unwrap();
        assert!((r - 0.763223).abs() < 1e-4);
    }
}
