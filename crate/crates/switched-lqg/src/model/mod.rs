//! Plant, controller and augmented-system representations.
//!
//! The plant is `x(k+1) = Ax(k) + Bu(k) + w(k)`, `y(k) = Cx(k) + v(k)` with
//! LQ weights `Q, R` and noise covariances `W, V`. Controllers are dynamic
//! output-feedback systems `z(k+1) = A_c z(k) + B_c u(k) + L_c y(k)`,
//! `u_c(k) = K_c z(k)`; note the internal state is driven by the *applied*
//! input `u(k)`, not by the controller's own candidate input.

mod io;
mod synth;

pub use io::{load_model, save_model, ModelFile};
pub use synth::{
    perturb_controller, random_stable_system, synth_optimal_controller, zero_fallback,
};

use nalgebra::DMatrix;

use crate::matops::{cholesky_lower, ensure_finite, ensure_square, solve_dlyap, spectral_radius};
use crate::{Error, Result};

fn ensure_spd_named(name: &str, m: &DMatrix<f64>) -> Result<()> {
    ensure_square(name, m)?;
    ensure_finite(name, m)?;
    let scale = crate::matops::max_abs(m);
    let asym = crate::matops::max_abs(&(m - m.transpose()));
    if asym > 1e-10 * scale.max(1e-300) {
        return Err(Error::NotSpd(format!("{name} is not symmetric")));
    }
    cholesky_lower(m).map_err(|e| Error::NotSpd(format!("{name}: {e}")))?;
    Ok(())
}

/// Plant matrices, noise covariances and cost weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    /// State matrix, n×n.
    pub a: DMatrix<f64>,
    /// Input matrix, n×m.
    pub b: DMatrix<f64>,
    /// Output matrix, p×n.
    pub c: DMatrix<f64>,
    /// Process-noise covariance, n×n SPD.
    pub w: DMatrix<f64>,
    /// Measurement-noise covariance, p×p SPD.
    pub v: DMatrix<f64>,
    /// State cost weight, n×n SPD.
    pub q: DMatrix<f64>,
    /// Input cost weight, m×m SPD.
    pub r: DMatrix<f64>,
}

impl SystemModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        w: DMatrix<f64>,
        v: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        let model = Self { a, b, c, w, v, q, r };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_square("A", &self.a)?;
        ensure_finite("A", &self.a)?;
        let n = self.a.nrows();
        if self.b.nrows() != n || self.b.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "B must be {n}xm with m >= 1, got {}x{}",
                self.b.nrows(),
                self.b.ncols()
            )));
        }
        if self.c.ncols() != n || self.c.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "C must be pxn with p >= 1 and n = {n}, got {}x{}",
                self.c.nrows(),
                self.c.ncols()
            )));
        }
        ensure_finite("B", &self.b)?;
        ensure_finite("C", &self.c)?;
        let m = self.input_dim();
        let p = self.output_dim();
        ensure_spd_named("W", &self.w)?;
        ensure_spd_named("V", &self.v)?;
        ensure_spd_named("Q", &self.q)?;
        ensure_spd_named("R", &self.r)?;
        if self.w.nrows() != n {
            return Err(Error::Dimension(format!("W must be {n}x{n}")));
        }
        if self.v.nrows() != p {
            return Err(Error::Dimension(format!("V must be {p}x{p}")));
        }
        if self.q.nrows() != n {
            return Err(Error::Dimension(format!("Q must be {n}x{n}")));
        }
        if self.r.nrows() != m {
            return Err(Error::Dimension(format!("R must be {m}x{m}")));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
}

/// Which slot a controller occupies in the switching scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerLabel {
    Primary,
    Fallback,
}

/// One dynamic output-feedback controller
/// `z(k+1) = A_c z(k) + B_c u(k) + L_c y(k)`, `u_c(k) = K_c z(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicController {
    /// Internal dynamics, n_c×n_c.
    pub a: DMatrix<f64>,
    /// Applied-input injection, n_c×m.
    pub b: DMatrix<f64>,
    /// Output injection, n_c×p.
    pub l: DMatrix<f64>,
    /// Output gain, m×n_c.
    pub k: DMatrix<f64>,
    pub label: ControllerLabel,
}

impl DynamicController {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        l: DMatrix<f64>,
        k: DMatrix<f64>,
        label: ControllerLabel,
    ) -> Result<Self> {
        let ctrl = Self { a, b, l, k, label };
        ctrl.validate()?;
        Ok(ctrl)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_square("controller A", &self.a)?;
        ensure_finite("controller A", &self.a)?;
        ensure_finite("controller B", &self.b)?;
        ensure_finite("controller L", &self.l)?;
        ensure_finite("controller K", &self.k)?;
        let nc = self.state_dim();
        if self.b.nrows() != nc || self.l.nrows() != nc || self.k.ncols() != nc {
            return Err(Error::Dimension(
                "controller matrices disagree on the internal state dimension".into(),
            ));
        }
        Ok(())
    }

    /// Consistency with a plant: shared input dimension m and output
    /// dimension p.
    pub fn validate_for(&self, sys: &SystemModel) -> Result<()> {
        self.validate()?;
        if self.b.ncols() != sys.input_dim() {
            return Err(Error::Dimension(format!(
                "controller B has {} columns, plant input dimension is {}",
                self.b.ncols(),
                sys.input_dim()
            )));
        }
        if self.l.ncols() != sys.output_dim() {
            return Err(Error::Dimension(format!(
                "controller L has {} columns, plant output dimension is {}",
                self.l.ncols(),
                sys.output_dim()
            )));
        }
        if self.k.nrows() != sys.input_dim() {
            return Err(Error::Dimension(format!(
                "controller K has {} rows, plant input dimension is {}",
                self.k.nrows(),
                sys.input_dim()
            )));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Candidate input `u_c = K_c z`.
    pub fn output(&self, z: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        &self.k * z
    }

    /// Internal-state update with the applied input `u` and measurement `y`.
    pub fn step(
        &self,
        z: &nalgebra::DVector<f64>,
        u: &nalgebra::DVector<f64>,
        y: &nalgebra::DVector<f64>,
    ) -> nalgebra::DVector<f64> {
        &self.a * z + &self.b * u + &self.l * y
    }
}

/// Stacks a grid of blocks into one matrix. Row heights and column widths
/// must be consistent; validated by the public builders before calling.
fn block_matrix(rows: &[&[&DMatrix<f64>]]) -> DMatrix<f64> {
    let row_heights: Vec<usize> = rows.iter().map(|r| r[0].nrows()).collect();
    let col_widths: Vec<usize> = rows[0].iter().map(|b| b.ncols()).collect();
    let total_r: usize = row_heights.iter().sum();
    let total_c: usize = col_widths.iter().sum();
    let mut out = DMatrix::zeros(total_r, total_c);
    let mut r0 = 0;
    for (i, row) in rows.iter().enumerate() {
        let mut c0 = 0;
        for (j, blockm) in row.iter().enumerate() {
            assert_eq!(blockm.nrows(), row_heights[i], "block row height mismatch");
            assert_eq!(blockm.ncols(), col_widths[j], "block column width mismatch");
            out.view_mut((r0, c0), (blockm.nrows(), blockm.ncols()))
                .copy_from(*blockm);
            c0 += col_widths[j];
        }
        r0 += row_heights[i];
    }
    out
}

/// Closed-loop matrix of `[x; z0]` under the fallback input `u = K0 z0`:
/// `[[A, B K0], [L0 C, A0 + B0 K0]]`.
pub fn build_cal_a0(sys: &SystemModel, fallback: &DynamicController) -> Result<DMatrix<f64>> {
    fallback.validate_for(sys)?;
    sys.validate()?;
    let bk0 = &sys.b * &fallback.k;
    let l0c = &fallback.l * &sys.c;
    let a00 = &fallback.a + &fallback.b * &fallback.k;
    Ok(block_matrix(&[&[&sys.a, &bk0], &[&l0c, &a00]]))
}

/// Closed-loop matrix of `[x; z1]` under the primary input `u = K1 z1`.
pub fn build_cal_a1(sys: &SystemModel, primary: &DynamicController) -> Result<DMatrix<f64>> {
    build_cal_a0(sys, primary)
}

/// Augmented matrix of `[x; z0; z1]` while the primary input is applied.
///
/// Both internal states are driven by the applied input `u = K1 z1`, so the
/// fallback state couples to `z1` through its own injection matrix `B0`.
pub fn build_scr_a1(
    sys: &SystemModel,
    primary: &DynamicController,
    fallback: &DynamicController,
) -> Result<DMatrix<f64>> {
    primary.validate_for(sys)?;
    fallback.validate_for(sys)?;
    sys.validate()?;
    let n0 = fallback.state_dim();
    let bk1 = &sys.b * &primary.k;
    let l0c = &fallback.l * &sys.c;
    let l1c = &primary.l * &sys.c;
    let b0k1 = &fallback.b * &primary.k;
    let a1k = &primary.a + &primary.b * &primary.k;
    let z_top = DMatrix::zeros(sys.state_dim(), n0);
    let z_bot = DMatrix::zeros(primary.state_dim(), n0);
    Ok(block_matrix(&[
        &[&sys.a, &z_top, &bk1],
        &[&l0c, &fallback.a, &b0k1],
        &[&l1c, &z_bot, &a1k],
    ]))
}

/// Augmented matrix of `[x; z0; z1]` while the fallback input is applied.
///
/// The third block column is zero except for the `A1` diagonal block, so the
/// spectrum splits into the spectrum of `cal_A0` and that of `A1`.
pub fn build_scr_a0(
    sys: &SystemModel,
    primary: &DynamicController,
    fallback: &DynamicController,
) -> Result<DMatrix<f64>> {
    primary.validate_for(sys)?;
    fallback.validate_for(sys)?;
    sys.validate()?;
    let n1 = primary.state_dim();
    let bk0 = &sys.b * &fallback.k;
    let l0c = &fallback.l * &sys.c;
    let l1c = &primary.l * &sys.c;
    let a00 = &fallback.a + &fallback.b * &fallback.k;
    let b1k0 = &primary.b * &fallback.k;
    let z_top = DMatrix::zeros(sys.state_dim(), n1);
    let z_mid = DMatrix::zeros(fallback.state_dim(), n1);
    Ok(block_matrix(&[
        &[&sys.a, &bk0, &z_top],
        &[&l0c, &a00, &z_mid],
        &[&l1c, &b1k0, &primary.a],
    ]))
}

/// Covariance of the stacked noise `[w; L0 v; L1 v]`.
pub fn build_sigma(
    sys: &SystemModel,
    primary: &DynamicController,
    fallback: &DynamicController,
) -> Result<DMatrix<f64>> {
    primary.validate_for(sys)?;
    fallback.validate_for(sys)?;
    sys.validate()?;
    let n = sys.state_dim();
    let n0 = fallback.state_dim();
    let n1 = primary.state_dim();
    let l0v = &fallback.l * &sys.v;
    let s00 = &l0v * fallback.l.transpose();
    let s01 = &l0v * primary.l.transpose();
    let s10 = s01.transpose();
    let s11 = &primary.l * &sys.v * primary.l.transpose();
    let z_n_n0 = DMatrix::zeros(n, n0);
    let z_n_n1 = DMatrix::zeros(n, n1);
    let z_n0_n = DMatrix::zeros(n0, n);
    let z_n1_n = DMatrix::zeros(n1, n);
    Ok(block_matrix(&[
        &[&sys.w, &z_n_n0, &z_n_n1],
        &[&z_n0_n, &s00, &s01],
        &[&z_n1_n, &s10, &s11],
    ]))
}

/// Steady-state covariance `Σ̃ = Σ_τ scrA0^τ Σ (scrA0^τ)ᵀ` of the augmented
/// noise accumulated across one fallback dwell block. Positive semidefinite;
/// its leading n×n block is definite whenever `W ≻ 0`.
pub fn build_sigma_tilde(scr_a0: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rho = spectral_radius(scr_a0)?;
    if rho >= 1.0 {
        return Err(Error::Assumption(format!(
            "Sigma-tilde requires a stable fallback-mode matrix, got spectral radius {rho:.6}"
        )));
    }
    solve_dlyap(scr_a0, sigma)
}

/// All augmented matrices for one (plant, primary, fallback) triple.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub cal_a0: DMatrix<f64>,
    pub cal_a1: DMatrix<f64>,
    pub scr_a0: DMatrix<f64>,
    pub scr_a1: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub n: usize,
    pub n0: usize,
    pub n1: usize,
}

impl AugmentedSystem {
    pub fn new(
        sys: &SystemModel,
        primary: &DynamicController,
        fallback: &DynamicController,
    ) -> Result<Self> {
        Ok(Self {
            cal_a0: build_cal_a0(sys, fallback)?,
            cal_a1: build_cal_a1(sys, primary)?,
            scr_a0: build_scr_a0(sys, primary, fallback)?,
            scr_a1: build_scr_a1(sys, primary, fallback)?,
            sigma: build_sigma(sys, primary, fallback)?,
            n: sys.state_dim(),
            n0: fallback.state_dim(),
            n1: primary.state_dim(),
        })
    }

    /// `N = n + n0 + n1`.
    pub fn total_dim(&self) -> usize {
        self.n + self.n0 + self.n1
    }

    /// Requires the fallback-mode matrix to be stable.
    pub fn sigma_tilde(&self) -> Result<DMatrix<f64>> {
        build_sigma_tilde(&self.scr_a0, &self.sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rand_matrix, rand_spd, rng};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn dm(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    pub(crate) fn scalar_system(a: f64) -> SystemModel {
        SystemModel::new(
            dm(1, 1, &[a]),
            dm(1, 1, &[1.0]),
            dm(1, 1, &[1.0]),
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
        )
        .unwrap()
    }

    fn scalar_controller(a: f64, b: f64, l: f64, k: f64, label: ControllerLabel) -> DynamicController {
        DynamicController::new(
            dm(1, 1, &[a]),
            dm(1, 1, &[b]),
            dm(1, 1, &[l]),
            dm(1, 1, &[k]),
            label,
        )
        .unwrap()
    }

    fn random_consistent_controller(
        r: &mut rand_chacha::ChaCha8Rng,
        sys: &SystemModel,
        nc: usize,
        label: ControllerLabel,
    ) -> DynamicController {
        DynamicController::new(
            rand_matrix(r, nc, nc, 0.3),
            rand_matrix(r, nc, sys.input_dim(), 0.3),
            rand_matrix(r, nc, sys.output_dim(), 0.3),
            rand_matrix(r, sys.input_dim(), nc, 0.3),
            label,
        )
        .unwrap()
    }

    #[test]
    fn cal_a0_zero_controller() {
        let sys = scalar_system(0.7);
        let zero = scalar_controller(0.0, 0.0, 0.0, 0.0, ControllerLabel::Fallback);
        let m = build_cal_a0(&sys, &zero).unwrap();
        assert_eq!(m, dm(2, 2, &[0.7, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn cal_a0_scalar_substitution() {
        let sys = scalar_system(0.5);
        let ctrl = scalar_controller(0.2, 0.1, 0.3, 0.4, ControllerLabel::Fallback);
        let m = build_cal_a0(&sys, &ctrl).unwrap();
        assert_relative_eq!(m, dm(2, 2, &[0.5, 0.4, 0.3, 0.24]), max_relative = 1e-15);
    }

    #[test]
    fn cal_a0_block_triangular_when_gain_zero() {
        let mut r = rng(3);
        let sys = SystemModel::new(
            rand_matrix(&mut r, 3, 3, 0.3),
            rand_matrix(&mut r, 3, 2, 1.0),
            rand_matrix(&mut r, 2, 3, 1.0),
            DMatrix::identity(3, 3),
            DMatrix::identity(2, 2),
            DMatrix::identity(3, 3),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let mut ctrl = random_consistent_controller(&mut r, &sys, 2, ControllerLabel::Fallback);
        ctrl.k = DMatrix::zeros(2, 2);
        let m = build_cal_a0(&sys, &ctrl).unwrap();
        // the (1,2) block B·K0 vanishes
        assert_eq!(m.view((0, 3), (3, 2)), DMatrix::zeros(3, 2));
    }

    #[test]
    fn scr_a0_zero_block_pattern() {
        let mut r = rng(4);
        for _ in 0..10 {
            let sys = SystemModel::new(
                rand_matrix(&mut r, 3, 3, 0.5),
                rand_matrix(&mut r, 3, 2, 1.0),
                rand_matrix(&mut r, 4, 3, 1.0),
                rand_spd(&mut r, 3),
                rand_spd(&mut r, 4),
                rand_spd(&mut r, 3),
                rand_spd(&mut r, 2),
            )
            .unwrap();
            let primary = random_consistent_controller(&mut r, &sys, 3, ControllerLabel::Primary);
            let fallback = random_consistent_controller(&mut r, &sys, 2, ControllerLabel::Fallback);
            let m = build_scr_a0(&sys, &primary, &fallback).unwrap();
            let (n, n0, n1) = (3, 2, 3);
            // (1,3) and (2,3) blocks are zero entrywise
            assert_eq!(m.view((0, n + n0), (n, n1)), DMatrix::zeros(n, n1));
            assert_eq!(m.view((n, n + n0), (n0, n1)), DMatrix::zeros(n0, n1));
            // (3,3) block is exactly A1
            assert_eq!(m.view((n + n0, n + n0), (n1, n1)), primary.a.view((0, 0), (n1, n1)));
            // spectrum splits: ρ(scrA0) = max(ρ(calA0), ρ(A1))
            let rho_scr = spectral_radius(&m).unwrap();
            let rho_cal = spectral_radius(&build_cal_a0(&sys, &fallback).unwrap()).unwrap();
            let rho_a1 = spectral_radius(&primary.a).unwrap();
            assert_relative_eq!(rho_scr, rho_cal.max(rho_a1), max_relative = 1e-7);
        }
    }

    #[test]
    fn scr_a1_zero_gain_decouples_third_column() {
        let mut r = rng(5);
        let sys = SystemModel::new(
            rand_matrix(&mut r, 2, 2, 0.5),
            rand_matrix(&mut r, 2, 1, 1.0),
            rand_matrix(&mut r, 2, 2, 1.0),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let mut primary = random_consistent_controller(&mut r, &sys, 2, ControllerLabel::Primary);
        primary.k = DMatrix::zeros(1, 2);
        let fallback = random_consistent_controller(&mut r, &sys, 1, ControllerLabel::Fallback);
        let m = build_scr_a1(&sys, &primary, &fallback).unwrap();
        // with K1 = 0 the third block column reduces to [0; 0; A1]
        assert_eq!(m.view((0, 3), (2, 2)), DMatrix::zeros(2, 2));
        assert_eq!(m.view((2, 3), (1, 2)), DMatrix::zeros(1, 2));
        assert_eq!(m.view((3, 3), (2, 2)), primary.a.view((0, 0), (2, 2)));
    }

    #[test]
    fn sigma_examples() {
        let sys = scalar_system(0.5);
        let zero0 = scalar_controller(0.0, 0.0, 0.0, 0.0, ControllerLabel::Fallback);
        let zero1 = scalar_controller(0.0, 0.0, 0.0, 0.0, ControllerLabel::Primary);
        let s = build_sigma(&sys, &zero1, &zero0).unwrap();
        assert_eq!(s, dm(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));

        let f = scalar_controller(0.0, 0.0, 1.0, 0.0, ControllerLabel::Fallback);
        let p = scalar_controller(0.0, 0.0, 2.0, 0.0, ControllerLabel::Primary);
        let s = build_sigma(&sys, &p, &f).unwrap();
        assert_eq!(
            s,
            dm(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 4.0])
        );
    }

    #[test]
    fn sigma_tilde_examples() {
        let sigma = DMatrix::identity(2, 2);
        // scrA0 = 0 gives Σ̃ = Σ
        let st = build_sigma_tilde(&DMatrix::zeros(2, 2), &sigma).unwrap();
        assert_relative_eq!(st, sigma, max_relative = 1e-14);

        // scalar geometric series
        let st = build_sigma_tilde(&dm(1, 1, &[0.5]), &dm(1, 1, &[1.0])).unwrap();
        assert_relative_eq!(st[(0, 0)], 4.0 / 3.0, max_relative = 1e-12);

        // nilpotent: two-term series Σ + A Σ Aᵀ
        let a = dm(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let sig = dm(2, 2, &[1.0, 0.2, 0.2, 2.0]);
        let st = build_sigma_tilde(&a, &sig).unwrap();
        assert_relative_eq!(st, &sig + &a * &sig * a.transpose(), max_relative = 1e-12);

        // unstable mode matrix is rejected
        assert!(matches!(
            build_sigma_tilde(&dm(1, 1, &[1.1]), &dm(1, 1, &[1.0])),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn sigma_tilde_dominates_sigma() {
        let mut r = rng(6);
        for _ in 0..10 {
            let n = 4;
            let a = crate::testutil::rand_stable(&mut r, n, 0.8);
            let sigma = rand_spd(&mut r, n);
            let st = build_sigma_tilde(&a, &sigma).unwrap();
            let diff = crate::matops::symmetrize(&(&st - &sigma));
            let lmin = diff
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(lmin >= -1e-9 * sigma.norm(), "Sigma-tilde ⪰ Sigma violated: {lmin}");
        }
    }

    #[test]
    fn model_validation_errors_name_the_field() {
        let sys = scalar_system(0.5);
        let mut bad = sys.clone();
        bad.w = dm(1, 1, &[-1.0]);
        let err = bad.validate().unwrap_err();
        assert!(err.to_string().contains('W'), "{err}");

        let mut bad = sys.clone();
        bad.b = DMatrix::zeros(2, 1);
        assert!(matches!(bad.validate(), Err(Error::Dimension(_))));
    }
}
