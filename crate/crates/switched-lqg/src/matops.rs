//! Dense real-matrix primitives used by every certificate: stability tests,
//! discrete Lyapunov and Riccati solvers, and weighted (P-) norms.
//!
//! All operations are pure functions on immutable inputs and validate
//! dimensions and finiteness before doing any arithmetic. Matrices are
//! `nalgebra::DMatrix<f64>`; eigenvalue, SVD and symmetric-eigen problems are
//! delegated to nalgebra, while the Lyapunov doubling iteration and the
//! structure-preserving doubling DARE solver are implemented here.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Default residual tolerance for the Lyapunov solvers, relative to `‖Q‖`.
pub const DLYAP_RESIDUAL_TOL: f64 = 1e-10;
/// Default residual tolerance for the DARE solver, relative to `‖P‖`.
pub const DARE_RESIDUAL_TOL: f64 = 1e-8;
/// Doubling stops once the propagated transition factor is this small.
pub const DOUBLING_STOP: f64 = 1e-14;
/// Iteration cap for the DARE doubling recursion.
pub const DARE_MAX_ITER: usize = 200;
/// Successive-iterate relative change that counts as DARE convergence.
pub const DARE_STEP_TOL: f64 = 1e-12;

pub(crate) fn ensure_finite(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{name} contains NaN or Inf")))
    }
}

pub(crate) fn ensure_square(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == m.ncols() && m.nrows() > 0 {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{name} must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn ensure_symmetric(name: &str, m: &DMatrix<f64>, rel_tol: f64) -> Result<()> {
    ensure_square(name, m)?;
    let scale = max_abs(m);
    let asym = max_abs(&(m - m.transpose()));
    if asym <= rel_tol * scale.max(1e-300) || scale == 0.0 {
        Ok(())
    } else {
        Err(Error::NotSpd(format!(
            "{name} is not symmetric: max asymmetry {asym:.3e} vs scale {scale:.3e}"
        )))
    }
}

/// Spectral radius `ρ(A)`: the largest eigenvalue modulus.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    ensure_square("spectral_radius input", a)?;
    ensure_finite("spectral_radius input", a)?;
    let eigs = a.clone().complex_eigenvalues();
    Ok(eigs.iter().fold(0.0f64, |acc, z| acc.max(z.norm())))
}

/// True iff `ρ(A) < 1 - margin`.
pub fn is_schur_stable(a: &DMatrix<f64>, margin: f64) -> Result<bool> {
    Ok(spectral_radius(a)? < 1.0 - margin)
}

/// Lower Cholesky factor with the pivot rule used for all SPD checks:
/// every pivot must exceed `1e-12 · tr(M)`.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_square("cholesky input", m)?;
    ensure_finite("cholesky input", m)?;
    let n = m.nrows();
    let threshold = 1e-12 * m.trace().abs();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= threshold {
            return Err(Error::NotSpd(format!(
                "pivot {d:.3e} at index {j} below threshold {threshold:.3e}"
            )));
        }
        let lj = d.sqrt();
        l[(j, j)] = lj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / lj;
        }
    }
    Ok(l)
}

/// Symmetric PSD square root; tiny negative eigenvalues (relative to the
/// largest) are clamped to zero, genuinely negative ones are an error.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_symmetric("psd_sqrt input", m, 1e-8)?;
    let eig = symmetrize(m).symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let tol = 1e-10 * lmax.max(1e-300);
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -tol {
            return Err(Error::NotSpd(format!(
                "psd_sqrt: eigenvalue {v:.3e} is negative"
            )));
        }
        *v = v.max(0.0).sqrt();
    }
    let d = DMatrix::from_diagonal(&vals);
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// A validated symmetric positive-definite matrix with cached square-root
/// factors, used as the weight of P-norms.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    m: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates symmetry (relative tolerance 1e-10) and positive
    /// definiteness (Cholesky with the `1e-12 · trace` pivot rule).
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        ensure_finite("SpdMatrix", &m)?;
        ensure_symmetric("SpdMatrix", &m, 1e-10)?;
        cholesky_lower(&m)?;
        let sym = symmetrize(&m);
        let eig = sym.clone().symmetric_eigen();
        let mut sqrt_vals = eig.eigenvalues.clone();
        let mut inv_sqrt_vals = eig.eigenvalues.clone();
        for (s, i) in sqrt_vals.iter_mut().zip(inv_sqrt_vals.iter_mut()) {
            if *s <= 0.0 {
                return Err(Error::NotSpd(format!(
                    "SpdMatrix: eigenvalue {s:.3e} is not positive"
                )));
            }
            let v = *s;
            *s = v.sqrt();
            *i = 1.0 / v.sqrt();
        }
        let sqrt = &eig.eigenvectors
            * DMatrix::from_diagonal(&sqrt_vals)
            * eig.eigenvectors.transpose();
        let inv_sqrt = &eig.eigenvectors
            * DMatrix::from_diagonal(&inv_sqrt_vals)
            * eig.eigenvectors.transpose();
        Ok(Self { m: sym, sqrt, inv_sqrt })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Symmetric square root `P^{1/2}`.
    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    /// Symmetric inverse square root `P^{-1/2}`.
    pub fn inv_sqrt(&self) -> &DMatrix<f64> {
        &self.inv_sqrt
    }

    /// `vᵀ P v` (clamped at zero against rounding).
    pub fn quadratic_form(&self, v: &DVector<f64>) -> f64 {
        (v.transpose() * &self.m * v)[(0, 0)].max(0.0)
    }
}

/// Induced 2-norm (largest singular value). Accepts rectangular input.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |acc, s| acc.max(*s))
}

fn dlyap_doubling(
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
    transpose_form: bool,
    residual_tol: f64,
) -> Result<DMatrix<f64>> {
    ensure_square("Lyapunov A", a)?;
    ensure_finite("Lyapunov A", a)?;
    ensure_symmetric("Lyapunov Q", q, 1e-8)?;
    if a.nrows() != q.nrows() {
        return Err(Error::Dimension(format!(
            "Lyapunov: A is {}x{} but Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let rho = spectral_radius(a)?;
    if rho >= 1.0 {
        return Err(Error::NotSchurStable(format!(
            "Lyapunov equation has no solution: spectral radius {rho:.6} >= 1"
        )));
    }

    let mut x = symmetrize(q);
    let mut e = a.clone();
    let mut converged = false;
    for _ in 0..120 {
        if max_abs(&e) < DOUBLING_STOP {
            converged = true;
            break;
        }
        if transpose_form {
            x += e.transpose() * &x * &e;
        } else {
            x += &e * &x * e.transpose();
        }
        x = symmetrize(&x);
        e = &e * &e;
        if !e.iter().all(|v| v.is_finite()) {
            return Err(Error::Convergence(
                "Lyapunov doubling diverged (transition powers overflow)".into(),
            ));
        }
    }
    if !converged {
        return Err(Error::Convergence(
            "Lyapunov doubling did not reach the stopping threshold".into(),
        ));
    }

    let residual = if transpose_form {
        (a.transpose() * &x * a - &x + q).norm()
    } else {
        (a * &x * a.transpose() - &x + q).norm()
    };
    let bound = residual_tol * q.norm();
    if residual > bound.max(1e-300) {
        return Err(Error::Convergence(format!(
            "Lyapunov residual {residual:.3e} exceeds {bound:.3e}"
        )));
    }
    Ok(x)
}

/// Solves `AᵀPA - P + Q = 0` for Schur-stable `A` and symmetric `Q` by the
/// doubling iteration `(A ← A², Q ← Q + AᵀQA)`.
pub fn solve_dlyap_transpose(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    dlyap_doubling(a, q, true, DLYAP_RESIDUAL_TOL)
}

/// Solves `AXAᵀ - X + Q = 0`, the closed form of `Σ_τ AᵗQ(Aᵗ)ᵀ`.
pub fn solve_dlyap(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    dlyap_doubling(a, q, false, DLYAP_RESIDUAL_TOL)
}

/// Same as [`solve_dlyap_transpose`] with a caller-chosen residual tolerance.
pub fn solve_dlyap_transpose_with_tol(
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
    residual_tol: f64,
) -> Result<DMatrix<f64>> {
    dlyap_doubling(a, q, true, residual_tol)
}

/// Stabilizing solution of the discrete algebraic Riccati equation
/// `P = AᵀPA - AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q` by the structure-preserving
/// doubling algorithm.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    solve_dare_with_tol(a, b, q, r, DARE_RESIDUAL_TOL)
}

/// [`solve_dare`] with a caller-chosen residual tolerance.
pub fn solve_dare_with_tol(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    residual_tol: f64,
) -> Result<DMatrix<f64>> {
    ensure_square("DARE A", a)?;
    ensure_finite("DARE A", a)?;
    ensure_finite("DARE B", b)?;
    ensure_symmetric("DARE Q", q, 1e-8)?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "DARE: B has {} rows, expected {n}",
            b.nrows()
        )));
    }
    if q.nrows() != n {
        return Err(Error::Dimension(format!(
            "DARE: Q is {}x{}, expected {n}x{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    if r.nrows() != b.ncols() || r.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "DARE: R is {}x{}, expected {}x{}",
            r.nrows(),
            r.ncols(),
            b.ncols(),
            b.ncols()
        )));
    }
    let r_chol = nalgebra::Cholesky::new(symmetrize(r))
        .ok_or_else(|| Error::NotSpd("DARE: R is not positive definite".into()))?;

    // G = B R⁻¹ Bᵀ
    let g0 = b * r_chol.solve(&b.transpose());
    let mut ak = a.clone();
    let mut gk = symmetrize(&g0);
    let mut hk = symmetrize(q);
    let eye = DMatrix::<f64>::identity(n, n);

    let mut converged = false;
    for _ in 0..DARE_MAX_ITER {
        let w = &eye + &gk * &hk;
        let w_lu = w.lu();
        let w_inv_a = w_lu
            .solve(&ak)
            .ok_or_else(|| Error::Convergence("DARE: I + G·H became singular".into()))?;
        let w_inv_g = w_lu
            .solve(&gk)
            .ok_or_else(|| Error::Convergence("DARE: I + G·H became singular".into()))?;

        let h_next = symmetrize(&(&hk + ak.transpose() * &hk * &w_inv_a));
        let g_next = symmetrize(&(&gk + &ak * &w_inv_g * ak.transpose()));
        let a_next = &ak * &w_inv_a;

        let step = (&h_next - &hk).norm();
        let scale = h_next.norm().max(1e-300);
        ak = a_next;
        gk = g_next;
        hk = h_next.clone();
        if !hk.iter().all(|v| v.is_finite()) {
            return Err(Error::Convergence("DARE iterates diverged".into()));
        }
        if step <= DARE_STEP_TOL * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence(format!(
            "DARE did not converge within {DARE_MAX_ITER} doubling steps"
        )));
    }

    let p = hk;
    let residual = dare_residual(a, b, q, r, &p)?;
    let bound = residual_tol * p.norm();
    if residual > bound.max(1e-300) {
        return Err(Error::Convergence(format!(
            "DARE residual {residual:.3e} exceeds {bound:.3e}"
        )));
    }
    Ok(p)
}

/// Frobenius norm of `AᵀPA - P - AᵀPB(R+BᵀPB)⁻¹BᵀPA + Q`.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<f64> {
    let s = symmetrize(&(r + b.transpose() * p * b));
    let s_chol = nalgebra::Cholesky::new(s)
        .ok_or_else(|| Error::NotSpd("R + BᵀPB is not positive definite".into()))?;
    let bpa = b.transpose() * p * a;
    let res = a.transpose() * p * a - p - bpa.transpose() * s_chol.solve(&bpa) + q;
    Ok(res.norm())
}

/// Optimal feedback gain `K = -(R + BᵀPB)⁻¹BᵀPA` for the stabilizing DARE
/// solution `P`; the closed loop `A + BK` is Schur-stable.
pub fn lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    ensure_square("lqr_gain A", a)?;
    if b.nrows() != a.nrows() || r.nrows() != b.ncols() || p.nrows() != a.nrows() {
        return Err(Error::Dimension("lqr_gain: inconsistent dimensions".into()));
    }
    let s = symmetrize(&(r + b.transpose() * p * b));
    // R SPD makes this factorization succeed for any PSD P.
    let s_chol = nalgebra::Cholesky::new(s)
        .ok_or_else(|| Error::NotSpd("lqr_gain: R + BᵀPB is not positive definite".into()))?;
    Ok(-s_chol.solve(&(b.transpose() * p * a)))
}

/// Similarity-transform P-norm `‖P^{1/2} M P^{-1/2}‖`. This is the norm that
/// is compatible with the vector norm `‖v‖_P = ‖P^{1/2}v‖`, i.e.
/// `‖Mv‖_P ≤ ‖M‖_P ‖v‖_P`.
pub fn weighted_matrix_norm(m: &DMatrix<f64>, p: &SpdMatrix) -> Result<f64> {
    ensure_square("weighted_matrix_norm input", m)?;
    ensure_finite("weighted_matrix_norm input", m)?;
    if m.nrows() != p.dim() {
        return Err(Error::Dimension(format!(
            "weighted_matrix_norm: M is {}x{} but P is {}x{}",
            m.nrows(),
            m.ncols(),
            p.dim(),
            p.dim()
        )));
    }
    Ok(spectral_norm(&(p.sqrt() * m * p.inv_sqrt())))
}

/// `‖P^{-1/2} M P^{-1/2}‖`. For symmetric `M` this is the smallest `γ`
/// with `|vᵀMv| ≤ γ·vᵀPv` — the relative quadratic-form bound. Unlike
/// [`weighted_matrix_norm`] it is not sub-multiplicative.
pub fn quadratic_form_pnorm(m: &DMatrix<f64>, p: &SpdMatrix) -> Result<f64> {
    ensure_square("quadratic_form_pnorm input", m)?;
    ensure_finite("quadratic_form_pnorm input", m)?;
    if m.nrows() != p.dim() {
        return Err(Error::Dimension(format!(
            "quadratic_form_pnorm: M is {}x{} but P is {}x{}",
            m.nrows(),
            m.ncols(),
            p.dim(),
            p.dim()
        )));
    }
    Ok(spectral_norm(&(p.inv_sqrt() * m * p.inv_sqrt())))
}

/// Vector P-norm `‖v‖_P = ‖P^{1/2} v‖ = √(vᵀPv)`.
pub fn weighted_vector_norm(v: &DVector<f64>, p: &SpdMatrix) -> Result<f64> {
    if v.len() != p.dim() {
        return Err(Error::Dimension(format!(
            "weighted_vector_norm: v has length {} but P is {}x{}",
            v.len(),
            p.dim(),
            p.dim()
        )));
    }
    Ok(p.quadratic_form(v).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rand_matrix, rand_spd, rand_stable, rng};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dm(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    // Kronecker-product oracle: vec(AᵀPA) = (Aᵀ ⊗ Aᵀ) vec(P) in
    // column-major vec, so (I - Aᵀ⊗Aᵀ) vec(P) = vec(Q).
    fn dlyap_transpose_kron(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let at = a.transpose();
        let k = at.kronecker(&at);
        let sys = DMatrix::<f64>::identity(n * n, n * n) - k;
        let rhs = DVector::from_column_slice(q.as_slice());
        let sol = sys.lu().solve(&rhs).expect("Kronecker system solvable");
        DMatrix::from_column_slice(n, n, sol.as_slice())
    }

    #[test]
    fn spectral_radius_examples() {
        assert_relative_eq!(
            spectral_radius(&DMatrix::identity(2, 2)).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            spectral_radius(&dm(2, 2, &[0.5, 0.0, 0.0, 0.3])).unwrap(),
            0.5,
            max_relative = 1e-12
        );
        // characteristic polynomial λ² + 0.25 = 0, eigenvalues ±0.5i
        assert_relative_eq!(
            spectral_radius(&dm(2, 2, &[0.0, 1.0, -0.25, 0.0])).unwrap(),
            0.5,
            max_relative = 1e-8
        );
    }

    #[test]
    fn spectral_radius_rejects_non_square() {
        assert!(matches!(
            spectral_radius(&DMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn schur_stability_examples() {
        assert!(is_schur_stable(&dm(2, 2, &[0.9, 0.0, 0.0, 0.5]), 0.0).unwrap());
        assert!(!is_schur_stable(&DMatrix::identity(2, 2), 0.0).unwrap());
        assert!(!is_schur_stable(&dm(1, 1, &[0.99]), 0.02).unwrap());
    }

    #[test]
    fn dlyap_transpose_scalar_closed_forms() {
        // P = q / (1 - a²)
        let p = solve_dlyap_transpose(&dm(1, 1, &[0.5]), &dm(1, 1, &[1.0])).unwrap();
        assert_relative_eq!(p[(0, 0)], 4.0 / 3.0, max_relative = 1e-12);

        let p = solve_dlyap_transpose(&dm(1, 1, &[0.9]), &dm(1, 1, &[2.0])).unwrap();
        assert_relative_eq!(p[(0, 0)], 2.0 / 0.19, max_relative = 1e-12);
        // cross-check against the truncated series Σ a^{2k} q
        let mut series = 0.0;
        let mut term = 2.0;
        while term > 1e-16 {
            series += term;
            term *= 0.81;
        }
        assert_relative_eq!(p[(0, 0)], series, max_relative = 1e-10);
    }

    #[test]
    fn dlyap_transpose_zero_a_returns_q() {
        let q = dm(2, 2, &[2.0, 0.5, 0.5, 3.0]);
        let p = solve_dlyap_transpose(&DMatrix::zeros(2, 2), &q).unwrap();
        assert_relative_eq!(p, q, max_relative = 1e-14);
    }

    #[test]
    fn dlyap_rejects_unstable_and_mismatched() {
        let q = DMatrix::identity(1, 1);
        assert!(matches!(
            solve_dlyap_transpose(&dm(1, 1, &[1.0]), &q),
            Err(Error::NotSchurStable(_))
        ));
        assert!(matches!(
            solve_dlyap_transpose(&dm(1, 1, &[0.5]), &DMatrix::identity(2, 2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn dlyap_forward_examples() {
        let x = solve_dlyap(&dm(1, 1, &[0.5]), &dm(1, 1, &[1.0])).unwrap();
        assert_relative_eq!(x[(0, 0)], 4.0 / 3.0, max_relative = 1e-12);

        let x = solve_dlyap(&dm(1, 1, &[0.0]), &dm(1, 1, &[3.0])).unwrap();
        assert_relative_eq!(x[(0, 0)], 3.0, max_relative = 1e-14);

        // nilpotent: series terminates after τ = 1, X = I + AAᵀ
        let a = dm(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let x = solve_dlyap(&a, &DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(x, dm(2, 2, &[2.0, 0.0, 0.0, 1.0]), max_relative = 1e-14);
    }

    #[test]
    fn dlyap_randomized_residual_and_kron_oracle() {
        let mut r = rng(7);
        for trial in 0..50 {
            let n = 1 + (trial % 6);
            let a = rand_stable(&mut r, n, 0.9);
            let q = rand_spd(&mut r, n);
            let p = solve_dlyap_transpose(&a, &q).unwrap();
            // residual and exact symmetry
            let res = (a.transpose() * &p * &a - &p + &q).norm();
            assert!(res <= 1e-10 * q.norm(), "residual {res} too large");
            assert!(max_abs(&(&p - p.transpose())) <= 1e-12 * max_abs(&p));
            // independent Kronecker solve
            let oracle = dlyap_transpose_kron(&a, &q);
            assert_relative_eq!(p, oracle, max_relative = 1e-8);
        }
    }

    #[test]
    fn dlyap_forward_matches_truncated_series() {
        let mut r = rng(8);
        for trial in 0..20 {
            let n = 1 + (trial % 5);
            let a = rand_stable(&mut r, n, 0.9);
            let q = rand_spd(&mut r, n);
            let x = solve_dlyap(&a, &q).unwrap();
            let mut sum = q.clone();
            let mut ak = a.clone();
            for _ in 0..200 {
                sum += &ak * &q * ak.transpose();
                ak = &ak * &a;
            }
            assert_relative_eq!(x, sum, max_relative = 1e-6);
        }
    }

    #[test]
    fn dare_golden_ratio_scalar() {
        let one = dm(1, 1, &[1.0]);
        let p = solve_dare(&one, &one, &one, &one).unwrap();
        let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert_relative_eq!(p[(0, 0)], golden, max_relative = 1e-12);

        let k = lqr_gain(&one, &one, &one, &p).unwrap();
        // K = -P/(1+P) = -1/φ since 1 + φ = φ²
        assert_relative_eq!(k[(0, 0)], -1.0 / golden, max_relative = 1e-12);
        assert!(is_schur_stable(&(&one + &one * &k), 0.0).unwrap());
    }

    #[test]
    fn dare_degenerate_edges() {
        let one = dm(1, 1, &[1.0]);
        // A = 0: recursion terminates at Q
        let p = solve_dare(&dm(1, 1, &[0.0]), &one, &one, &one).unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0, max_relative = 1e-12);
        // B = 0 with stable A reduces to the Lyapunov closed form
        let p = solve_dare(&dm(1, 1, &[0.5]), &dm(1, 1, &[0.0]), &one, &one).unwrap();
        assert_relative_eq!(p[(0, 0)], 4.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn dare_randomized_fixed_point_and_stable_loop() {
        let mut r = rng(9);
        for trial in 0..30 {
            let n = 1 + (trial % 5);
            let m = 1 + (trial % 2);
            let a = rand_matrix(&mut r, n, n, 1.0);
            let b = rand_matrix(&mut r, n, m, 1.0);
            let q = rand_spd(&mut r, n);
            let rr = rand_spd(&mut r, m);
            let p = match solve_dare(&a, &b, &q, &rr) {
                Ok(p) => p,
                // a random (A,B) pair can be unstabilizable; skip those
                Err(_) => continue,
            };
            assert!(dare_residual(&a, &b, &q, &rr, &p).unwrap() <= 1e-8 * p.norm());
            let k = lqr_gain(&a, &b, &rr, &p).unwrap();
            assert!(spectral_radius(&(&a + &b * &k)).unwrap() < 1.0);
        }
    }

    #[test]
    fn lqr_gain_zero_edges() {
        let a = dm(2, 2, &[0.3, 0.1, 0.0, 0.2]);
        let b = DMatrix::zeros(2, 1);
        let r = DMatrix::identity(1, 1);
        let p = solve_dare(&a, &b, &DMatrix::identity(2, 2), &r).unwrap();
        let k = lqr_gain(&a, &b, &r, &p).unwrap();
        assert_eq!(k, DMatrix::zeros(1, 2));

        let k = lqr_gain(&DMatrix::zeros(2, 2), &dm(2, 1, &[1.0, 2.0]), &r, &p).unwrap();
        assert_relative_eq!(k, DMatrix::zeros(1, 2), epsilon = 1e-15);
    }

    #[test]
    fn weighted_norm_examples() {
        let p = SpdMatrix::new(dm(2, 2, &[4.0, 0.0, 0.0, 1.0])).unwrap();
        assert_relative_eq!(
            weighted_matrix_norm(&DMatrix::identity(2, 2), &p).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        // diagonal P commutes with diagonal M, so the norm is max |diag|
        let m = dm(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        assert_relative_eq!(weighted_matrix_norm(&m, &p).unwrap(), 2.0, max_relative = 1e-12);

        let id = SpdMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let arb = dm(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        assert_relative_eq!(
            weighted_matrix_norm(&arb, &id).unwrap(),
            spectral_norm(&arb),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            quadratic_form_pnorm(&arb, &id).unwrap(),
            spectral_norm(&arb),
            max_relative = 1e-12
        );

        assert_relative_eq!(
            weighted_vector_norm(&DVector::from_vec(vec![3.0, 4.0]), &id).unwrap(),
            5.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            weighted_vector_norm(&DVector::from_vec(vec![1.0, 2.0]), &p).unwrap(),
            8.0f64.sqrt(),
            max_relative = 1e-14
        );
        assert_eq!(
            weighted_vector_norm(&DVector::zeros(2), &p).unwrap(),
            0.0
        );
    }

    #[test]
    fn spd_matrix_rejects_bad_inputs() {
        assert!(SpdMatrix::new(dm(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
        assert!(SpdMatrix::new(dm(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
        assert!(SpdMatrix::new(dm(2, 2, &[0.0, 0.0, 0.0, 0.0])).is_err());
        assert!(SpdMatrix::new(DMatrix::identity(3, 3)).is_ok());
    }

    #[test]
    fn psd_sqrt_roundtrip() {
        let mut r = rng(10);
        let m = rand_spd(&mut r, 4);
        let s = psd_sqrt(&m).unwrap();
        assert_relative_eq!(&s * &s, m, max_relative = 1e-9);
        // singular PSD input is fine
        let sing = dm(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let s = psd_sqrt(&sing).unwrap();
        assert_relative_eq!(&s * &s, sing, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // ‖AB‖_P ≤ ‖A‖_P ‖B‖_P for the similarity-transform norm
        #[test]
        fn pnorm_submultiplicative(seed in 0u64..1000) {
            let mut r = rng(seed);
            let n = 1 + (seed as usize % 4);
            let a = rand_matrix(&mut r, n, n, 2.0);
            let b = rand_matrix(&mut r, n, n, 2.0);
            let p = SpdMatrix::new(rand_spd(&mut r, n)).unwrap();
            let lhs = weighted_matrix_norm(&(&a * &b), &p).unwrap();
            let rhs = weighted_matrix_norm(&a, &p).unwrap() * weighted_matrix_norm(&b, &p).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12);
        }

        // ‖Av‖_P ≤ ‖A‖_P ‖v‖_P
        #[test]
        fn pnorm_vector_compatible(seed in 0u64..1000) {
            let mut r = rng(seed.wrapping_add(77));
            let n = 1 + (seed as usize % 4);
            let a = rand_matrix(&mut r, n, n, 2.0);
            let v_mat = rand_matrix(&mut r, n, 1, 2.0);
            let v = DVector::from_column_slice(v_mat.as_slice());
            let p = SpdMatrix::new(rand_spd(&mut r, n)).unwrap();
            let lhs = weighted_vector_norm(&(&a * &v), &p).unwrap();
            let rhs = weighted_matrix_norm(&a, &p).unwrap() * weighted_vector_norm(&v, &p).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12);
        }
    }
}
