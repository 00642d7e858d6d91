//! Direct evaluation of the estimation-stability condition for an integer
//! sensing interval.

/// `ρ > 1 − λ^{−q}`: the probability of a successful update beats the
/// growth of the prediction error over `q` slots.
pub fn interval_is_stable(rho: f64, lambda: f64, q: u32) -> bool {
    rho > 1.0 - lambda.powi(-(q as i32))
}

/// Largest stable integer interval found by counting up from 1, capped at
/// `limit`. Zero when even `q = 1` fails.
pub fn largest_stable_interval(rho: f64, lambda: f64, limit: u32) -> u32 {
    let mut best = 0;
    for q in 1..=limit {
        if interval_is_stable(rho, lambda, q) {
            best = q;
        } else {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_in_q() {
        assert!(interval_is_stable(0.9, 1.1, 24));
        assert!(!interval_is_stable(0.9, 1.1, 25));
        assert_eq!(largest_stable_interval(0.9, 1.1, 200), 24);
    }
}
