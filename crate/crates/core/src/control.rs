//! UAV dynamics and LQR tracking.
//!
//! Each axis is a double integrator sampled at the slot length, with both
//! diagonal entries of the per-axis block multiplied by the instability
//! factor λ:
//!
//! ```text
//! A1 = [[λ, T], [0, λ]],  B1 = [T²/2, T]ᵀ,  A = A1 ⊗ I3,  B = B1 ⊗ I3
//! ```
//!
//! State order is `[px, py, pz, vx, vy, vz]`.

use nalgebra::{DMatrix, Matrix3x6, Matrix6, Matrix6x3, SymmetricEigen, Vector3, Vector6};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scenario::ControlParams;

pub const DARE_MAX_ITERATIONS: usize = 10_000;
pub const DARE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState {
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
}

impl UavState {
    pub fn new(pos: Vector3<f64>, vel: Vector3<f64>) -> Self {
        Self { pos, vel }
    }

    pub fn at_rest(pos: Vector3<f64>) -> Self {
        Self::new(pos, Vector3::zeros())
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.pos.x, self.pos.y, self.pos.z, self.vel.x, self.vel.y, self.vel.z,
        )
    }

    pub fn from_vector(x: &Vector6<f64>) -> Self {
        Self {
            pos: Vector3::new(x[0], x[1], x[2]),
            vel: Vector3::new(x[3], x[4], x[5]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.pos.iter().chain(self.vel.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    pub accel: Vector3<f64>,
    /// The raw LQR output exceeded `u_max` and was scaled back.
    pub clamped: bool,
}

impl ControlCommand {
    pub fn zero() -> Self {
        Self {
            accel: Vector3::zeros(),
            clamped: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a: Matrix6<f64>,
    pub b: Matrix6x3<f64>,
    pub k: Matrix3x6<f64>,
    pub p_riccati: Matrix6<f64>,
    pub max_eigenvalue: f64,
    pub slot_length: f64,
    pub v_max: f64,
    pub u_max: f64,
    /// `L` with `L Lᵀ = R`, used to draw process noise.
    pub noise_factor: Matrix6<f64>,
}

/// Per-axis transition block and input column.
pub fn axis_blocks(slot_length: f64, lambda: f64) -> ([[f64; 2]; 2], [f64; 2]) {
    let t = slot_length;
    ([[lambda, t], [0.0, lambda]], [0.5 * t * t, t])
}

pub fn build_system(cp: &ControlParams) -> Result<SystemMatrices> {
    let (a1, b1) = axis_blocks(cp.slot_length, cp.instability_factor);
    let mut a = Matrix6::zeros();
    let mut b = Matrix6x3::zeros();
    for axis in 0..3 {
        for i in 0..2 {
            for j in 0..2 {
                a[(3 * i + axis, 3 * j + axis)] = a1[i][j];
            }
            b[(3 * i + axis, axis)] = b1[i];
        }
    }

    let (p, k) = solve_dare(
        &DMatrix::from_column_slice(6, 6, a.as_slice()),
        &DMatrix::from_column_slice(6, 3, b.as_slice()),
        &DMatrix::from_column_slice(6, 6, cp.state_weight.as_slice()),
        &DMatrix::from_column_slice(3, 3, cp.action_cost_weight.as_slice()),
    )?;

    Ok(SystemMatrices {
        a,
        b,
        k: Matrix3x6::from_column_slice(k.as_slice()),
        p_riccati: Matrix6::from_column_slice(p.as_slice()),
        max_eigenvalue: cp.instability_factor,
        slot_length: cp.slot_length,
        v_max: cp.v_max,
        u_max: cp.u_max,
        noise_factor: psd_factor(&cp.state_noise_cov),
    })
}

/// Factor of a PSD matrix via its eigen-decomposition; tiny negative
/// eigenvalues from rounding are treated as zero.
fn psd_factor(r: &Matrix6<f64>) -> Matrix6<f64> {
    let eig = SymmetricEigen::new(*r);
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    eig.eigenvectors * Matrix6::from_diagonal(&sqrt)
}

fn riccati_rhs(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    eps: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let bt_p = b.transpose() * p;
    let s = &bt_p * b + eps;
    let bt_p_a = &bt_p * a;
    let k = match s.clone().cholesky() {
        Some(ch) => ch.solve(&bt_p_a),
        None => s
            .lu()
            .solve(&bt_p_a)
            .ok_or_else(|| Error::arg("action_cost_weight", "BᵀPB + ε is singular"))?,
    };
    let at_p = a.transpose() * p;
    let next = &at_p * a - (&at_p * b) * &k + q;
    // Symmetrize to keep rounding from accumulating.
    let next = (&next + next.transpose()) * 0.5;
    Ok((next, k))
}

/// Solves `P = AᵀPA − AᵀPB(BᵀPB + ε)⁻¹BᵀPA + Q` by fixed-point iteration
/// from `P₀ = Q`, and returns `(P, K)` with `K = (BᵀPB + ε)⁻¹BᵀPA`.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    eps: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) {
        return Err(Error::arg("A/B/Q", "inconsistent dimensions"));
    }
    if eps.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::arg("ε", "must be m x m for an n x m input matrix"));
    }

    let mut p = q.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..DARE_MAX_ITERATIONS {
        let (next, k) = riccati_rhs(a, b, q, eps, &p)?;
        let diff = (&next - &p).norm();
        let scale = p.norm();
        residual = if scale > 0.0 { diff / scale } else { diff };
        if !residual.is_finite() {
            break;
        }
        // The stop rule is checked on the P being returned, so the residual
        // property holds for the output itself.
        if diff <= DARE_TOLERANCE * scale || diff == 0.0 {
            return Ok((p, k));
        }
        p = next;
    }
    Err(Error::DareNonConvergence {
        iterations: DARE_MAX_ITERATIONS,
        residual,
    })
}

/// Unclamped LQR law `u = −K(x − x_ref)`.
pub fn lqr_raw(sm: &SystemMatrices, x: &Vector6<f64>, x_ref_next: &Vector6<f64>) -> Vector3<f64> {
    -(sm.k * (x - x_ref_next))
}

/// Scales `v` back onto the ball of radius `limit` if it lies outside.
pub fn clamp_norm(v: Vector3<f64>, limit: f64) -> (Vector3<f64>, bool) {
    let n = v.norm();
    if n > limit {
        (v * (limit / n), true)
    } else {
        (v, false)
    }
}

/// LQR command toward `x_ref_next`, limited to `‖u‖ ≤ u_max`. Scaling the
/// whole vector also keeps every component within `u_max`.
pub fn lqr_action(sm: &SystemMatrices, x: &UavState, x_ref_next: &UavState) -> ControlCommand {
    lqr_action_vec(sm, &x.to_vector(), &x_ref_next.to_vector())
}

pub fn lqr_action_vec(
    sm: &SystemMatrices,
    x: &Vector6<f64>,
    x_ref_next: &Vector6<f64>,
) -> ControlCommand {
    let (accel, clamped) = clamp_norm(lqr_raw(sm, x, x_ref_next), sm.u_max);
    ControlCommand { accel, clamped }
}

/// Tracking command `u = u_r − K(x − x_r)` for the reference state and its
/// nominal acceleration at the same slot, limited to `‖u‖ ≤ u_max`. With a
/// reference at rest this is `lqr_action`.
pub fn lqr_tracking(
    sm: &SystemMatrices,
    x: &Vector6<f64>,
    x_ref: &Vector6<f64>,
    u_ref: &Vector3<f64>,
) -> ControlCommand {
    let (accel, clamped) = clamp_norm(u_ref + lqr_raw(sm, x, x_ref), sm.u_max);
    ControlCommand { accel, clamped }
}

/// Noise-free linear update `A x + B u`.
pub fn propagate(sm: &SystemMatrices, x: &Vector6<f64>, u: &Vector3<f64>) -> Vector6<f64> {
    sm.a * x + sm.b * u
}

pub fn draw_noise<R: Rng + ?Sized>(sm: &SystemMatrices, rng: &mut R) -> Vector6<f64> {
    let z = Vector6::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    sm.noise_factor * z
}

/// Noise-free update with the instability acting on the deviation from
/// `anchor`: `A x + B u − (λ−1)·anchor`, i.e. `anchor + A(x − anchor) + B u`
/// for a stationary anchor. The anchor is the reference state of the slot;
/// at `λ = 1` it has no effect. With the anchor at the origin this is
/// [`propagate`].
pub fn propagate_about(
    sm: &SystemMatrices,
    x: &Vector6<f64>,
    u: &Vector3<f64>,
    anchor: &Vector6<f64>,
) -> Vector6<f64> {
    sm.a * x + sm.b * u - (sm.max_eigenvalue - 1.0) * anchor
}

/// Plant update with a given noise realization; velocity is limited to
/// `‖v‖ ≤ v_max`. Returns the new state and whether the limit was hit.
pub fn step_with_noise(
    sm: &SystemMatrices,
    x: &Vector6<f64>,
    u: &Vector3<f64>,
    w: &Vector6<f64>,
) -> (Vector6<f64>, bool) {
    step_about_with_noise(sm, x, u, &Vector6::zeros(), w)
}

/// [`step_with_noise`] around an anchor, see [`propagate_about`].
pub fn step_about_with_noise(
    sm: &SystemMatrices,
    x: &Vector6<f64>,
    u: &Vector3<f64>,
    anchor: &Vector6<f64>,
    w: &Vector6<f64>,
) -> (Vector6<f64>, bool) {
    let mut next = propagate_about(sm, x, u, anchor) + w;
    let (vel, clamped) = clamp_norm(Vector3::new(next[3], next[4], next[5]), sm.v_max);
    next[3] = vel.x;
    next[4] = vel.y;
    next[5] = vel.z;
    (next, clamped)
}

/// `x(k+1) = A x(k) + B u(k) + w(k)` with `w ~ N(0, R)` from `rng`.
pub fn step_dynamics<R: Rng + ?Sized>(
    sm: &SystemMatrices,
    x: &UavState,
    u: &ControlCommand,
    rng: &mut R,
) -> UavState {
    let w = draw_noise(sm, rng);
    UavState::from_vector(&step_with_noise(sm, &x.to_vector(), &u.accel, &w).0)
}

/// Mean squared tracking error `(1/T) Σ ‖x(t) − x_r(t)‖²`.
pub fn tracking_error_metric<'a, I>(pairs: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a Vector6<f64>, &'a Vector6<f64>)>,
{
    let mut sum = 0.0;
    let mut count = 0usize;
    for (x, r) in pairs {
        sum += (x - r).norm_squared();
        count += 1;
    }
    if count == 0 {
        return Err(Error::arg("log", "tracking metric needs at least one slot"));
    }
    Ok(sum / count as f64)
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::MissionScenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn baseline(lambda: f64) -> SystemMatrices {
        let mut s = MissionScenario::baseline();
        s.control.instability_factor = lambda;
        build_system(&s.control).unwrap()
    }

    #[test]
    fn a_structure_at_unit_lambda() {
        let sm = baseline(1.0);
        for i in 0..6 {
            assert_eq!(sm.a[(i, i)], 1.0);
        }
        for axis in 0..3 {
            assert_eq!(sm.a[(axis, axis + 3)], 0.1);
        }
        assert_eq!(sm.a.iter().filter(|v| **v != 0.0).count(), 9);
    }

    #[test]
    fn max_eigenvalue_matches_lambda() {
        let sm = baseline(1.05);
        assert_eq!(sm.max_eigenvalue, 1.05);
        let a = DMatrix::from_column_slice(6, 6, sm.a.as_slice());
        assert!((spectral_radius(&a) - 1.05).abs() < 1e-9);
    }

    #[test]
    fn scalar_golden_ratio() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let (p, k) = solve_dare(&one, &one, &one, &one).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((p[(0, 0)] - phi).abs() < 1e-8);
        assert!((k[(0, 0)] - (phi - 1.0)).abs() < 1e-8);
    }

    #[test]
    fn zero_a_gives_q() {
        let a = DMatrix::zeros(2, 2);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.5]);
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0]);
        let eps = DMatrix::from_element(1, 1, 0.3);
        let (p, k) = solve_dare(&a, &b, &q, &eps).unwrap();
        assert_eq!(p, q);
        assert!(k.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn closed_loop_is_stable() {
        for lambda in [1.0, 1.05, 1.10] {
            let sm = baseline(lambda);
            let cl = sm.a - sm.b * sm.k;
            let cl = DMatrix::from_column_slice(6, 6, cl.as_slice());
            assert!(spectral_radius(&cl) < 1.0, "λ={lambda}");
        }
    }

    #[test]
    fn dare_residual_property() {
        let sm = baseline(1.05);
        let s = MissionScenario::baseline();
        let a = DMatrix::from_column_slice(6, 6, sm.a.as_slice());
        let b = DMatrix::from_column_slice(6, 3, sm.b.as_slice());
        let q = DMatrix::from_column_slice(6, 6, s.control.state_weight.as_slice());
        let e = DMatrix::from_column_slice(3, 3, s.control.action_cost_weight.as_slice());
        let p = DMatrix::from_column_slice(6, 6, sm.p_riccati.as_slice());
        let (rhs, _) = riccati_rhs(&a, &b, &q, &e, &p).unwrap();
        assert!((&rhs - &p).norm() <= 1e-9 * p.norm());
    }

    #[test]
    fn zero_error_zero_action() {
        let sm = baseline(1.0);
        let x = UavState::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(0.5, 0.0, -1.0));
        let u = lqr_action(&sm, &x, &x);
        assert_eq!(u.accel, Vector3::zeros());
        assert!(!u.clamped);
    }

    #[test]
    fn linear_before_clamp() {
        let sm = baseline(1.0);
        let e = Vector6::new(0.3, -0.2, 0.1, 0.05, 0.0, -0.02);
        let base = lqr_raw(&sm, &e, &Vector6::zeros());
        for alpha in [-1.0, 0.5, 2.0] {
            let scaled = lqr_raw(&sm, &(e * alpha), &Vector6::zeros());
            assert!((scaled - base * alpha).norm() < 1e-12);
        }
    }

    #[test]
    fn huge_error_is_clamped() {
        let sm = baseline(1.0);
        let x = UavState::at_rest(Vector3::new(1e4, -1e4, 0.0));
        let u = lqr_action(&sm, &x, &UavState::at_rest(Vector3::zeros()));
        assert!(u.clamped);
        assert!((u.accel.norm() - 10.0).abs() < 1e-9);
        assert!(u.accel.iter().all(|c| c.abs() <= 10.0));
    }

    #[test]
    fn step_examples() {
        let mut s = MissionScenario::baseline();
        s.control.state_noise_cov = Matrix6::zeros();
        let sm = build_system(&s.control).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let zero = UavState::at_rest(Vector3::zeros());
        assert_eq!(step_dynamics(&sm, &zero, &ControlCommand::zero(), &mut rng), zero);

        let x = UavState::new(Vector3::zeros(), Vector3::new(10.0, 0.0, 0.0));
        let next = step_dynamics(&sm, &x, &ControlCommand::zero(), &mut rng);
        assert!((next.pos - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(next.vel, Vector3::new(10.0, 0.0, 0.0));
    }

    #[test]
    fn seeded_steps_are_reproducible() {
        let sm = baseline(1.05);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut x = UavState::at_rest(Vector3::new(0.0, 0.0, 100.0));
            let target = UavState::at_rest(Vector3::new(50.0, 0.0, 100.0));
            let mut out = Vec::new();
            for _ in 0..200 {
                let u = lqr_action(&sm, &x, &target);
                x = step_dynamics(&sm, &x, &u, &mut rng);
                out.push(x);
            }
            out
        };
        let a = run();
        let b = run();
        assert!(a.iter().zip(&b).all(|(x, y)| {
            x.to_vector()
                .iter()
                .zip(y.to_vector().iter())
                .all(|(p, q)| p.to_bits() == q.to_bits())
        }));
    }

    #[test]
    fn separable_per_axis() {
        let sm = baseline(1.05);
        let x = Vector6::new(1.0, -2.0, 3.0, 0.4, 0.5, -0.6);
        let u = Vector3::new(0.7, -0.8, 0.9);
        let full = propagate(&sm, &x, &u);
        let (a1, b1) = axis_blocks(0.1, 1.05);
        for axis in 0..3 {
            let p = a1[0][0] * x[axis] + a1[0][1] * x[axis + 3] + b1[0] * u[axis];
            let v = a1[1][0] * x[axis] + a1[1][1] * x[axis + 3] + b1[1] * u[axis];
            assert!((full[axis] - p).abs() < 1e-12);
            assert!((full[axis + 3] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_free_convergence() {
        let mut s = MissionScenario::baseline();
        s.control.state_noise_cov = Matrix6::zeros();
        let sm = build_system(&s.control).unwrap();
        let target = Vector6::new(5.0, -3.0, 100.0, 0.0, 0.0, 0.0);
        let mut x = Vector6::new(0.0, 0.0, 100.0, 0.0, 0.0, 0.0);
        let mut errors = Vec::new();
        for _ in 0..600 {
            let u = lqr_action_vec(&sm, &x, &target);
            x = step_with_noise(&sm, &x, &u.accel, &Vector6::zeros()).0;
            errors.push((x - target).norm());
        }
        assert!(*errors.last().unwrap() < 1e-6);
        // Monotone from some finite slot on.
        let start = errors.len() / 2;
        assert!(errors[start..].windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn tracking_metric_examples() {
        let x = Vector6::new(2.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let r = Vector6::zeros();
        let pairs = vec![(x, r); 17];
        let m = tracking_error_metric(pairs.iter().map(|(a, b)| (a, b))).unwrap();
        assert!((m - 4.0).abs() < 1e-12);
        assert!(tracking_error_metric(std::iter::empty()).is_err());
    }
}
