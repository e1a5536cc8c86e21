//! Controller synthesis, perturbation, and random test-system generation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ControllerLabel, DynamicController, SystemModel};
use crate::matops::{lqr_gain, solve_dare, spectral_norm, spectral_radius};
use crate::{Error, Result};

const RANK_TOL: f64 = 1e-8;

fn rank_with_tol(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    sv.iter().filter(|s| **s > RANK_TOL * smax.max(1e-300)).count()
}

/// Rank test on the n-block Kalman controllability matrix `[B AB … A^{n-1}B]`.
pub fn is_controllable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let m = b.ncols();
    let mut blocks = DMatrix::zeros(n, n * m);
    let mut ab = b.clone();
    for i in 0..n {
        blocks.view_mut((0, i * m), (n, m)).copy_from(&ab);
        ab = a * &ab;
    }
    rank_with_tol(&blocks) == n
}

/// Dual rank test on `[C; CA; …; CA^{n-1}]`.
pub fn is_observable(a: &DMatrix<f64>, c: &DMatrix<f64>) -> bool {
    is_controllable(&a.transpose(), &c.transpose())
}

/// LQG-optimal controller in the observer form
/// `(A - L*C, B, L*, K*)`: `K*` from the control Riccati equation on
/// `(A, B, Q, R)` and the Kalman gain `L*` from the dual (filter) Riccati
/// equation on `(Aᵀ, Cᵀ, W, V)`.
pub fn synth_optimal_controller(sys: &SystemModel) -> Result<DynamicController> {
    sys.validate()?;
    if !is_controllable(&sys.a, &sys.b) {
        return Err(Error::Assumption("(A, B) is not controllable".into()));
    }
    if !is_observable(&sys.a, &sys.c) {
        return Err(Error::Assumption("(A, C) is not observable".into()));
    }
    let p_ctrl = solve_dare(&sys.a, &sys.b, &sys.q, &sys.r)?;
    let k_gain = lqr_gain(&sys.a, &sys.b, &sys.r, &p_ctrl)?;

    let at = sys.a.transpose();
    let ct = sys.c.transpose();
    let sigma_e = solve_dare(&at, &ct, &sys.w, &sys.v)?;
    // dual gain is -(V + CΣCᵀ)⁻¹CΣAᵀ, so L* = A Σ Cᵀ (V + CΣCᵀ)⁻¹
    let l_gain = -lqr_gain(&at, &ct, &sys.v, &sigma_e)?.transpose();

    DynamicController::new(
        &sys.a - &l_gain * &sys.c,
        sys.b.clone(),
        l_gain,
        k_gain,
        ControllerLabel::Primary,
    )
}

/// The trivial stabilizing controller realizing `u0(k) ≡ 0`, represented
/// with a single identically-zero internal state so every block formula
/// stays non-degenerate. Only available for open-loop-stable plants.
pub fn zero_fallback(sys: &SystemModel) -> Result<DynamicController> {
    let rho = spectral_radius(&sys.a)?;
    if rho >= 1.0 {
        return Err(Error::Assumption(format!(
            "zero fallback requires an open-loop-stable plant, got spectral radius {rho:.6}"
        )));
    }
    DynamicController::new(
        DMatrix::zeros(1, 1),
        DMatrix::zeros(1, sys.input_dim()),
        DMatrix::zeros(1, sys.output_dim()),
        DMatrix::zeros(sys.input_dim(), 1),
        ControllerLabel::Fallback,
    )
}

/// Shifts every controller matrix by `lambda` times the all-ones matrix of
/// its shape. Used to detune an optimal controller into a marginally
/// destabilizing one.
pub fn perturb_controller(ctrl: &DynamicController, lambda: f64) -> DynamicController {
    let ones = |r: usize, c: usize| DMatrix::from_element(r, c, lambda);
    DynamicController {
        a: &ctrl.a + ones(ctrl.a.nrows(), ctrl.a.ncols()),
        b: &ctrl.b + ones(ctrl.b.nrows(), ctrl.b.ncols()),
        l: &ctrl.l + ones(ctrl.l.nrows(), ctrl.l.ncols()),
        k: &ctrl.k + ones(ctrl.k.nrows(), ctrl.k.ncols()),
        label: ctrl.label,
    }
}

/// Seeded random plant with `ρ(A)` rescaled to `target_rho`, standard-normal
/// `B` and `C`, identity weights and covariances, verified controllable and
/// observable (regenerated on failure).
pub fn random_stable_system(
    seed: u64,
    n: usize,
    m: usize,
    p: usize,
    target_rho: f64,
) -> Result<SystemModel> {
    if n == 0 || m == 0 || p == 0 {
        return Err(Error::Dimension("n, m, p must all be at least 1".into()));
    }
    if !(target_rho > 0.0 && target_rho < 1.0) {
        return Err(Error::Generation(format!(
            "target spectral radius must lie in (0, 1), got {target_rho}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut randn = |r: usize, c: usize| {
        DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
    };
    for _ in 0..64 {
        let g = randn(n, n);
        let rho = spectral_radius(&g)?;
        if rho < 1e-9 || spectral_norm(&g) == 0.0 {
            continue;
        }
        let a = g * (target_rho / rho);
        let b = randn(n, m);
        let c = randn(p, n);
        if !is_controllable(&a, &b) || !is_observable(&a, &c) {
            continue;
        }
        return SystemModel::new(
            a,
            b,
            c,
            DMatrix::identity(n, n),
            DMatrix::identity(p, p),
            DMatrix::identity(n, n),
            DMatrix::identity(m, m),
        );
    }
    Err(Error::Generation(
        "exhausted regeneration attempts for a controllable/observable system".into(),
    ))
}
