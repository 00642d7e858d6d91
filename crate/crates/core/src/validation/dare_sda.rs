//! Riccati oracles: the structured doubling algorithm for the general case
//! and the quadratic-formula solution of the scalar case.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Solves `P = AᵀPA − AᵀPB(BᵀPB + R)⁻¹BᵀPA + Q` by structured doubling:
///
/// ```text
/// A₀ = A, G₀ = B R⁻¹ Bᵀ, H₀ = Q
/// W = (I + G H)⁻¹
/// A ← A W A,  G ← G + A W G Aᵀ,  H ← H + Aᵀ H W A
/// ```
///
/// `H` converges quadratically to `P`.
pub fn dare_doubling(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::arg("R", "action weight is singular"))?;
    let mut ak = a.clone();
    let mut gk = b * r_inv * b.transpose();
    let mut hk = q.clone();
    let eye = DMatrix::<f64>::identity(n, n);
    for _ in 0..200 {
        let w = (&eye + &gk * &hk)
            .try_inverse()
            .ok_or_else(|| Error::arg("A/B", "doubling step hit a singular matrix"))?;
        let a_next = &ak * &w * &ak;
        let g_next = &gk + &ak * &w * &gk * ak.transpose();
        let h_next = &hk + ak.transpose() * &hk * &w * &ak;
        let change = (&h_next - &hk).norm() / h_next.norm().max(f64::MIN_POSITIVE);
        ak = a_next;
        gk = (&g_next + g_next.transpose()) * 0.5;
        hk = (&h_next + h_next.transpose()) * 0.5;
        if change < 1e-15 {
            return Ok(hk);
        }
    }
    Ok(hk)
}

/// Positive root of the scalar Riccati equation
/// `b²P² + (r − q b² − a² r) P − q r = 0`.
pub fn scalar_dare(a: f64, b: f64, q: f64, r: f64) -> f64 {
    let b2 = b * b;
    let lin = r - q * b2 - a * a * r;
    (-lin + (lin * lin + 4.0 * b2 * q * r).sqrt()) / (2.0 * b2)
}
