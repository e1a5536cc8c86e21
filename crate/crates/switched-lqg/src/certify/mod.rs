//! Certificates: every constant and bound the switching strategy's analysis
//! provides, computed from the model matrices.
//!
//! Three layers build on each other:
//!
//! * [`safety_certificate`] — needs only the fallback side (Assumption 1).
//!   Solves `calA0ᵀ P0 calA0 - P0 + blockdiag(Q, K0ᵀRK0 + I) = 0`, extracts
//!   the minimal contraction factor `rho0`, and evaluates the LQ cost bound
//!   that holds for *any* primary controller.
//! * [`dwell_certificate`] — needs both controllers stable (Assumptions 1
//!   and 2). Builds the common Lyapunov pair `(P, rho)` from the primary
//!   mode and the smallest dwell time `t_min` that makes one whole fallback
//!   block contract at least as much.
//! * [`efficiency_certificate`] — the moment bound `Q_script` on the
//!   transformed sequence, the escape bound `escape(a)`, the input-gap gain
//!   `K_script`, the switching-probability bound `t·escape(M/K)`, and the
//!   bound on the cost gap `J - J1`, which decays like
//!   `exp(-gap_decay_rate · M²)` as the threshold grows.
//!
//! Two induced P-norm conventions are in play: the similarity transform
//! `‖P^{1/2}·P^{-1/2}‖` (sub-multiplicative, used for contraction factors)
//! and the quadratic-form bound `‖P^{-1/2}·P^{-1/2}‖` (what moment
//! inequalities need). Where a constant could be read either way, both are
//! computed and the conservative (larger) one enters the bound; the report
//! carries both.

mod report;

pub use report::CertificateReport;

use nalgebra::DMatrix;

use crate::matops::{
    quadratic_form_pnorm, solve_dlyap_transpose, spectral_norm, spectral_radius,
    weighted_matrix_norm, SpdMatrix,
};
use crate::model::{AugmentedSystem, DynamicController, SystemModel};
use crate::supervisor::SupervisorConfig;
use crate::{Error, Result};

/// Smallest contraction factor used for the escape bound; the analysis of
/// the weighted tail sum assumes `rho > 1/4`, so smaller computed values are
/// inflated to this (the bound is increasing in rho, hence still valid).
pub const RHO_ESCAPE_FLOOR: f64 = 0.2500001;

/// Iteration cap for the dwell-time search.
pub const T_MIN_CAP: usize = 1_000_000;

/// Spectral radii of the four matrices the two assumptions constrain.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// `ρ` of the fallback closed loop on `[x; z0]`.
    pub rho_cal_a0: f64,
    /// `ρ(A0)`, the fallback controller's own dynamics.
    pub rho_a0: f64,
    /// `ρ` of the primary closed loop on `[x; z1]`.
    pub rho_cal_a1: f64,
    /// `ρ(A1)`, the primary controller's own dynamics.
    pub rho_a1: f64,
    pub assumption1: bool,
    pub assumption2: bool,
}

impl AssumptionReport {
    /// Radii as (name, value, required-stable) rows, for reports.
    pub fn rows(&self) -> [(&'static str, f64); 4] {
        [
            ("rho_cal_A0", self.rho_cal_a0),
            ("rho_A0", self.rho_a0),
            ("rho_cal_A1", self.rho_cal_a1),
            ("rho_A1", self.rho_a1),
        ]
    }
}

/// Evaluates both stability assumptions. Never errors on instability; this
/// is a pure report.
pub fn check_assumptions(
    sys: &SystemModel,
    primary: &DynamicController,
    fallback: &DynamicController,
) -> Result<AssumptionReport> {
    let aug = AugmentedSystem::new(sys, primary, fallback)?;
    let rho_cal_a0 = spectral_radius(&aug.cal_a0)?;
    let rho_a0 = spectral_radius(&fallback.a)?;
    let rho_cal_a1 = spectral_radius(&aug.cal_a1)?;
    let rho_a1 = spectral_radius(&primary.a)?;
    Ok(AssumptionReport {
        rho_cal_a0,
        rho_a0,
        rho_cal_a1,
        rho_a1,
        assumption1: rho_cal_a0 < 1.0 && rho_a0 < 1.0,
        assumption2: rho_cal_a1 < 1.0 && rho_a1 < 1.0,
    })
}

fn require_assumption1(report: &AssumptionReport) -> Result<()> {
    if report.assumption1 {
        return Ok(());
    }
    let mut bad = Vec::new();
    if report.rho_cal_a0 >= 1.0 {
        bad.push(format!("rho(cal_A0) = {:.6}", report.rho_cal_a0));
    }
    if report.rho_a0 >= 1.0 {
        bad.push(format!("rho(A0) = {:.6}", report.rho_a0));
    }
    Err(Error::Assumption(format!(
        "Assumption 1 violated: {} (must be < 1)",
        bad.join(", ")
    )))
}

fn require_assumption2(report: &AssumptionReport) -> Result<()> {
    if report.assumption2 {
        return Ok(());
    }
    let mut bad = Vec::new();
    if report.rho_cal_a1 >= 1.0 {
        bad.push(format!("rho(cal_A1) = {:.6}", report.rho_cal_a1));
    }
    if report.rho_a1 >= 1.0 {
        bad.push(format!("rho(A1) = {:.6}", report.rho_a1));
    }
    Err(Error::Assumption(format!(
        "Assumption 2 violated: {} (must be < 1)",
        bad.join(", ")
    )))
}

fn block_diag2(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, rb) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(ra + rb, ra + rb);
    out.view_mut((0, 0), (ra, a.ncols())).copy_from(a);
    out.view_mut((ra, ra), (rb, b.ncols())).copy_from(b);
    out
}

/// Places `m` into an `nn×nn` zero matrix with its (0,0) corner at `at`.
fn embed(nn: usize, at: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(nn, nn);
    out.view_mut((at, at), (m.nrows(), m.ncols())).copy_from(m);
    out
}

/// The safety side: Lyapunov certificate for the fallback loop and the
/// threshold-dependent LQ cost bound.
#[derive(Debug, Clone)]
pub struct SafetyCertificate {
    /// Solution of the fallback-loop Lyapunov equation on `[x; z0]`.
    pub p0: SpdMatrix,
    /// Minimal contraction factor: `calA0ᵀ P0 calA0 ⪯ rho0 · P0`.
    pub rho0: f64,
    /// Threshold the bounds below are evaluated at.
    pub m: f64,
    /// `‖[B; B0]‖` — how hard a bounded input gap can push `[x; z0]`.
    pub input_block_norm: f64,
    /// `tr(blockdiag(W, L0 V L0ᵀ) · P0)`.
    pub noise_trace_term: f64,
    pub p0_norm: f64,
    pub r_norm: f64,
    /// Bound on `E V0(k)` for every k.
    pub mean_v0_bound: f64,
    /// Bound on the LQ cost of the switched loop, any primary controller.
    pub cost_bound: f64,
}

impl SafetyCertificate {
    /// `4(1+rho0)/(1-rho0)² · (m²‖[B;B0]‖²‖P0‖ + tr(blockdiag(W, L0VL0ᵀ)P0))`.
    pub fn mean_v0_bound_for(&self, m: f64) -> f64 {
        let r0 = self.rho0;
        4.0 * (1.0 + r0) / ((1.0 - r0) * (1.0 - r0))
            * (m * m * self.input_block_norm * self.input_block_norm * self.p0_norm
                + self.noise_trace_term)
    }

    /// The LQ cost bound as a function of the threshold:
    /// `(8(1+rho0)‖[B;B0]‖²‖P0‖/(1-rho0)² + 2‖R‖)·m² + 8(1+rho0)·tr(…)/(1-rho0)²`.
    pub fn cost_bound_for(&self, m: f64) -> f64 {
        let r0 = self.rho0;
        let denom = (1.0 - r0) * (1.0 - r0);
        (8.0 * (1.0 + r0) * self.input_block_norm * self.input_block_norm * self.p0_norm / denom
            + 2.0 * self.r_norm)
            * m
            * m
            + 8.0 * (1.0 + r0) * self.noise_trace_term / denom
    }
}

/// Computes the safety certificate. Requires Assumption 1; `m >= 0` (the
/// supervisor itself requires a positive threshold, but the bound is also
/// well-defined at the `m = 0` limit, where only the noise term remains).
pub fn safety_certificate(
    sys: &SystemModel,
    fallback: &DynamicController,
    m: f64,
) -> Result<SafetyCertificate> {
    sys.validate()?;
    fallback.validate_for(sys)?;
    if m < 0.0 || m.is_nan() {
        return Err(Error::Dimension(format!("threshold must be >= 0, got {m}")));
    }
    let cal_a0 = crate::model::build_cal_a0(sys, fallback)?;
    let rho_cal_a0 = spectral_radius(&cal_a0)?;
    let rho_a0 = spectral_radius(&fallback.a)?;
    require_assumption1(&AssumptionReport {
        rho_cal_a0,
        rho_a0,
        rho_cal_a1: 0.0,
        rho_a1: 0.0,
        assumption1: rho_cal_a0 < 1.0 && rho_a0 < 1.0,
        assumption2: true,
    })?;

    let k0rk0 = fallback.k.transpose() * &sys.r * &fallback.k;
    let q_block = block_diag2(
        &sys.q,
        &(k0rk0 + DMatrix::<f64>::identity(fallback.state_dim(), fallback.state_dim())),
    );
    let p0 = SpdMatrix::new(solve_dlyap_transpose(&cal_a0, &q_block)?)?;
    let rho0 = weighted_matrix_norm(&cal_a0, &p0)?.powi(2);
    if rho0 >= 1.0 {
        return Err(Error::Convergence(format!(
            "contraction factor rho0 = {rho0} did not come out below 1"
        )));
    }

    let n = sys.state_dim();
    let n0 = fallback.state_dim();
    let mut b_stack = DMatrix::zeros(n + n0, sys.input_dim());
    b_stack.view_mut((0, 0), (n, sys.input_dim())).copy_from(&sys.b);
    b_stack
        .view_mut((n, 0), (n0, sys.input_dim()))
        .copy_from(&fallback.b);
    let input_block_norm = spectral_norm(&b_stack);

    let l0vl0 = &fallback.l * &sys.v * fallback.l.transpose();
    let noise_block = block_diag2(&sys.w, &l0vl0);
    let noise_trace_term = (&noise_block * p0.matrix()).trace();

    let mut cert = SafetyCertificate {
        p0,
        rho0,
        m,
        input_block_norm,
        noise_trace_term,
        p0_norm: 0.0,
        r_norm: spectral_norm(&sys.r),
        mean_v0_bound: 0.0,
        cost_bound: 0.0,
    };
    cert.p0_norm = spectral_norm(cert.p0.matrix());
    cert.mean_v0_bound = cert.mean_v0_bound_for(m);
    cert.cost_bound = cert.cost_bound_for(m);
    Ok(cert)
}

/// Common Lyapunov pair `(P, rho)` and minimal dwell time.
#[derive(Debug, Clone)]
pub struct DwellCertificate {
    /// Solution of `scrA1ᵀ P scrA1 - P + I = 0` on the full augmented state.
    pub p: SpdMatrix,
    /// Minimal factor with `scrA1ᵀ P scrA1 ⪯ rho·P`; below 1 by construction.
    pub rho: f64,
    /// Smallest `t ≥ 1` with `‖scrA0^t‖²_P < rho`.
    pub t_min: usize,
}

/// The pair `(P, rho)` certified by the primary mode: `P` solves the
/// Lyapunov equation with identity weight and `rho` is the exact minimal
/// contraction factor (the largest generalized eigenvalue), so
/// `scrA1ᵀPscrA1 ⪯ rho·P` holds with equality in the extremal direction.
pub fn common_lyapunov_pair(scr_a1: &DMatrix<f64>) -> Result<(SpdMatrix, f64)> {
    let nn = scr_a1.nrows();
    let p = SpdMatrix::new(solve_dlyap_transpose(
        scr_a1,
        &DMatrix::<f64>::identity(nn, nn),
    )?)?;
    let rho = weighted_matrix_norm(scr_a1, &p)?.powi(2);
    if rho >= 1.0 {
        return Err(Error::Convergence(format!(
            "common-Lyapunov contraction rho = {rho} did not come out below 1"
        )));
    }
    Ok((p, rho))
}

/// `‖scrA0^t‖²_P`, the contraction of one whole fallback block.
pub fn dwell_contraction(scr_a0: &DMatrix<f64>, p: &SpdMatrix, t: usize) -> Result<f64> {
    let s = p.sqrt() * scr_a0 * p.inv_sqrt();
    let mut pow = s.clone();
    for _ in 1..t {
        pow = &pow * &s;
    }
    Ok(spectral_norm(&pow).powi(2))
}

/// True iff `‖scrA0^t‖²_P ⪯ rho` up to a 1e-12 relative tie tolerance.
/// `rho` is the exact minimal contraction factor, so genuine ties occur
/// (e.g. identical mode matrices at `t = 1`) and count as satisfied.
pub fn dwell_condition_holds(contraction_sq: f64, rho: f64) -> bool {
    contraction_sq <= rho * (1.0 + 1e-12)
}

/// Smallest `t ≥ 1` whose whole fallback block contracts at least as much
/// as one primary step (`‖scrA0^t‖²_P ⪯ rho`), found by incremental
/// matrix-power accumulation; capped at [`T_MIN_CAP`].
pub fn find_t_min(scr_a0: &DMatrix<f64>, p: &SpdMatrix, rho: f64) -> Result<usize> {
    let s = p.sqrt() * scr_a0 * p.inv_sqrt();
    let mut pow = s.clone();
    for t in 1..=T_MIN_CAP {
        let norm_sq = spectral_norm(&pow).powi(2);
        if dwell_condition_holds(norm_sq, rho) {
            return Ok(t);
        }
        if !norm_sq.is_finite() || norm_sq > 1e200 {
            return Err(Error::Convergence(
                "dwell-time search diverged; fallback mode is not contracting in P".into(),
            ));
        }
        pow = &pow * &s;
    }
    Err(Error::Convergence(format!(
        "no dwell time below the cap {T_MIN_CAP} satisfies the contraction condition"
    )))
}

/// Computes the dwell certificate. Requires Assumptions 1 and 2.
pub fn dwell_certificate(
    sys: &SystemModel,
    primary: &DynamicController,
    fallback: &DynamicController,
) -> Result<DwellCertificate> {
    let report = check_assumptions(sys, primary, fallback)?;
    require_assumption1(&report)?;
    require_assumption2(&report)?;
    let aug = AugmentedSystem::new(sys, primary, fallback)?;
    let (p, rho) = common_lyapunov_pair(&aug.scr_a1)?;
    let t_min = find_t_min(&aug.scr_a0, &p, rho)?;
    Ok(DwellCertificate { p, rho, t_min })
}

/// Prefactor and quadratic rate of the escape bound
/// `escape(a) = prefactor · exp(-rate · a²)`:
/// `prefactor = 4N/(rho^{-1/2} - 1)`,
/// `rate = (1 - rho^{1/4})² / (2N ‖Σ̃‖ ‖P‖ ‖P⁻¹‖)`.
pub fn escape_constants(
    n_total: usize,
    rho: f64,
    sigma_tilde_norm: f64,
    p_norm: f64,
    p_inv_norm: f64,
) -> (f64, f64) {
    let nn = n_total as f64;
    let prefactor = 4.0 * nn / (rho.powf(-0.5) - 1.0);
    let rate = (1.0 - rho.powf(0.25)).powi(2) / (2.0 * nn * sigma_tilde_norm * p_norm * p_inv_norm);
    (prefactor, rate)
}

/// All constants of the efficiency analysis, evaluated for one `(M, t)`
/// configuration, with closures over `M` and `t` exposed as methods.
#[derive(Debug, Clone)]
pub struct EfficiencyCertificate {
    /// `N = n + n0 + n1`.
    pub n_total: usize,
    /// Threshold and dwell time the certificate was evaluated at.
    pub m: f64,
    pub t: usize,
    /// Common-Lyapunov contraction factor (exact minimal value).
    pub rho: f64,
    /// `rho` used inside the escape bound: inflated to [`RHO_ESCAPE_FLOOR`]
    /// when the computed value is at or below 1/4.
    pub rho_escape: f64,
    pub rho_inflated: bool,
    /// Bound on `E Ṽ(j)²` over the transformed sequence.
    pub q_cal: f64,
    /// Validity edge for the escape argument: needs `a > a0`.
    pub a0: f64,
    /// `‖[K0  -K1]‖`: input gap per unit of augmented state.
    pub k_diff: f64,
    pub sigma: DMatrix<f64>,
    pub sigma_tilde: DMatrix<f64>,
    pub sigma_tilde_norm: f64,
    pub p_norm: f64,
    pub p_inv_norm: f64,
    pub trace_sigma_p: f64,
    pub trace_sigma_tilde_p: f64,
    /// `‖P0‖_P` with P0 embedded on `[x; z0; z1]` (zero on z1), literal
    /// convention — the constant of the quadratic-form inequality.
    pub p0_pnorm: f64,
    /// `‖Σ̃^{1/2} P0_emb Σ̃^{1/2}‖`, i.e. `‖P0‖` in the inverse-Σ̃ weight.
    pub p0_sigma_tilde_inv_norm: f64,
    /// Bound on the fourth moment `E ‖[x;z0]‖⁴_P0`.
    pub fourth_moment_bound: f64,
    pub escape_prefactor: f64,
    pub escape_rate: f64,
    pub c1: f64,
    pub c2_literal: f64,
    pub c2_similarity: f64,
    /// Conservative choice carried into the gap bound.
    pub c2: f64,
    pub delta_norm_literal: f64,
    pub delta_norm_similarity: f64,
    /// Conservative choice carried into the gap bound.
    pub delta_norm: f64,
    /// Stage-cost weight of the primary loop on the augmented state.
    pub q_scr1: DMatrix<f64>,
    /// Stage-cost difference weight between fallback and primary inputs.
    pub delta: DMatrix<f64>,
    /// Exact asymptotic decay rate of `log gap_bound` against `M²` (the
    /// escape rate divided by `4 K²`; the gap bound scales with the fourth
    /// root of the escape probability).
    pub gap_decay_rate: f64,
    /// The un-divided rate `escape_rate / K²`, i.e. the decay rate of the
    /// switching probability itself.
    pub switch_prob_decay_rate: f64,
    /// `m >= a0 · K`: the escape argument's validity region.
    pub valid_m: bool,
    /// `t >= t_min`.
    pub valid_t: bool,
    pub dwell: DwellCertificate,
    pub safety: SafetyCertificate,
}

impl EfficiencyCertificate {
    /// Tail bound on `‖X̃(j)‖ ≥ a` (valid for `a > a0`); decreasing in `a`.
    pub fn escape(&self, a: f64) -> f64 {
        self.escape_prefactor * (-self.escape_rate * a * a).exp()
    }

    /// `ln escape(a)`, exact in the regime where `escape` underflows.
    pub fn log_escape(&self, a: f64) -> f64 {
        self.escape_prefactor.ln() - self.escape_rate * a * a
    }

    /// Bound on the probability of not applying the primary input:
    /// `t · escape(M/K)`.
    pub fn switch_prob_bound(&self, m: f64, t: usize) -> f64 {
        t as f64 * self.escape(m / self.k_diff)
    }

    /// The fourth-root factor `G(M, t)` combining the fourth-moment bound
    /// and the switching-probability bound.
    pub fn g_factor(&self, m: f64, t: usize) -> f64 {
        (self.fourth_moment_bound * self.switch_prob_bound(m, t)).powf(0.25)
    }

    pub fn log_g_factor(&self, m: f64, t: usize) -> f64 {
        0.25 * (self.fourth_moment_bound.ln()
            + (t as f64).ln()
            + self.log_escape(m / self.k_diff))
    }

    /// Bound on the extra LQ cost `J - J1`:
    /// `2 c1 c2 G + (c2² + ‖Δ‖_P0) G²`.
    pub fn gap_bound(&self, m: f64, t: usize) -> f64 {
        let g = self.g_factor(m, t);
        2.0 * self.c1 * self.c2 * g + (self.c2 * self.c2 + self.delta_norm) * g * g
    }

    /// `ln gap_bound(M, t)`, computed in log space so it stays exact far
    /// past the underflow point of [`Self::gap_bound`].
    pub fn log_gap_bound(&self, m: f64, t: usize) -> f64 {
        let log_g = self.log_g_factor(m, t);
        let linear = 2.0 * self.c1 * self.c2;
        let quad = self.c2 * self.c2 + self.delta_norm;
        if linear > 0.0 {
            // ln(linear·g) + ln(1 + quad·g/linear)
            let g = self.g_factor(m, t);
            linear.ln() + log_g + (quad * g / linear).ln_1p()
        } else if quad > 0.0 {
            quad.ln() + 2.0 * log_g
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Sum of `‖A^s‖` over `s ≥ 0` in both weighted-norm conventions, truncated
/// once both terms drop below 1e-14.
fn weighted_power_series(a: &DMatrix<f64>, g: &SpdMatrix) -> Result<(f64, f64)> {
    let nn = a.nrows();
    let s_mat = g.sqrt() * a * g.inv_sqrt();
    let mut raw_pow = DMatrix::<f64>::identity(nn, nn);
    let mut sim_pow = DMatrix::<f64>::identity(nn, nn);
    let mut sum_lit = 0.0;
    let mut sum_sim = 0.0;
    for _ in 0..200_000 {
        let term_lit = spectral_norm(&(g.inv_sqrt() * &raw_pow * g.inv_sqrt()));
        let term_sim = spectral_norm(&sim_pow);
        sum_lit += term_lit;
        sum_sim += term_sim;
        if term_lit < 1e-14 && term_sim < 1e-14 {
            return Ok((sum_lit, sum_sim));
        }
        if !(sum_lit.is_finite() && sum_sim.is_finite()) {
            break;
        }
        raw_pow = &raw_pow * a;
        sim_pow = &sim_pow * &s_mat;
    }
    Err(Error::Convergence(
        "weighted power series did not converge; matrix is not stable enough".into(),
    ))
}

/// Computes every efficiency constant and bound for the configuration
/// `(cfg.M, cfg.t)`. Requires Assumptions 1 and 2; `t < t_min` and
/// `M < a0·K` are *flagged* (`valid_t`, `valid_m`) rather than rejected, so
/// the numbers remain inspectable outside the proven region.
pub fn efficiency_certificate(
    sys: &SystemModel,
    primary: &DynamicController,
    fallback: &DynamicController,
    cfg: &SupervisorConfig,
) -> Result<EfficiencyCertificate> {
    let report = check_assumptions(sys, primary, fallback)?;
    require_assumption1(&report)?;
    require_assumption2(&report)?;
    let aug = AugmentedSystem::new(sys, primary, fallback)?;
    let nn = aug.total_dim();
    let (n, n0, n1) = (aug.n, aug.n0, aug.n1);

    let safety = safety_certificate(sys, fallback, cfg.threshold())?;
    let dwell = dwell_certificate(sys, primary, fallback)?;
    let p = &dwell.p;
    let rho = dwell.rho;

    let sigma = aug.sigma.clone();
    let sigma_tilde = aug.sigma_tilde()?;
    let sigma_tilde_norm = spectral_norm(&sigma_tilde);
    let p_norm = spectral_norm(p.matrix());
    let p_inv_norm = spectral_norm(&(p.inv_sqrt() * p.inv_sqrt()));
    let trace_sigma_p = (&sigma * p.matrix()).trace();
    let trace_sigma_tilde_p = (&sigma_tilde * p.matrix()).trace();

    let nf = nn as f64;
    let chi_sq_second_moment = nf * nf + 2.0 * nf;

    // E Ṽ(j)² ≤ (6ρ(trΣ̃P)² + (1-ρ)(N²+2N)‖P‖²‖Σ̃‖²)/((1-ρ)(1-ρ²))
    let q_cal = (6.0 * rho * trace_sigma_tilde_p * trace_sigma_tilde_p
        + (1.0 - rho) * chi_sq_second_moment * p_norm * p_norm * sigma_tilde_norm * sigma_tilde_norm)
        / ((1.0 - rho) * (1.0 - rho * rho));

    let rho_inflated = rho <= 0.25;
    let rho_escape = if rho_inflated { RHO_ESCAPE_FLOOR } else { rho };
    let (escape_prefactor, escape_rate) =
        escape_constants(nn, rho_escape, sigma_tilde_norm, p_norm, p_inv_norm);
    let a0 = 8.0 * nf * sigma_tilde_norm * p_norm * p_inv_norm / (1.0 - rho_escape.powf(0.25));

    // K = ‖[K0  -K1]‖
    let m_in = sys.input_dim();
    let mut k_concat = DMatrix::zeros(m_in, n0 + n1);
    k_concat.view_mut((0, 0), (m_in, n0)).copy_from(&fallback.k);
    k_concat.view_mut((0, n0), (m_in, n1)).copy_from(&(-&primary.k));
    let k_diff = spectral_norm(&k_concat);

    // P0 embedded on the full augmented state, zero on the z1 block.
    let p0_emb = embed(nn, 0, safety.p0.matrix());
    let p0_pnorm = quadratic_form_pnorm(&p0_emb, p)?;
    let st_sqrt = crate::matops::psd_sqrt(&sigma_tilde)?;
    let p0_sigma_tilde_inv_norm = spectral_norm(&(&st_sqrt * &p0_emb * &st_sqrt));
    let fourth_moment_bound = 8.0
        * (q_cal * p0_pnorm * p0_pnorm
            + chi_sq_second_moment * p0_sigma_tilde_inv_norm * p0_sigma_tilde_inv_norm);

    // stage-cost weights on the augmented state
    let k1rk1 = primary.k.transpose() * &sys.r * &primary.k;
    let k0rk0 = fallback.k.transpose() * &sys.r * &fallback.k;
    let q_scr1 = embed(nn, 0, &sys.q) + embed(nn, n + n0, &k1rk1);
    let delta = embed(nn, n, &k0rk0) - embed(nn, n + n0, &k1rk1);

    let c1 = quadratic_form_pnorm(&q_scr1, p)? * (trace_sigma_p / (1.0 - rho)).sqrt();

    // c2 = ‖scrA0 - scrA1‖_{Q1+I} · ‖Q1+I‖_{P0ext} · Σ_s ‖scrA1^s‖_{Q1+I},
    // in both norm conventions; the P0 weight is extended with identity on
    // the z1 block to stay positive definite.
    let g_w = SpdMatrix::new(&q_scr1 + DMatrix::<f64>::identity(nn, nn))?;
    let diff = &aug.scr_a0 - &aug.scr_a1;
    let q1_plus_i = g_w.matrix().clone();
    let p0_ext = SpdMatrix::new(embed(nn, 0, safety.p0.matrix()) + embed(nn, n + n0, &DMatrix::<f64>::identity(n1, n1)))?;
    let f1_lit = quadratic_form_pnorm(&diff, &g_w)?;
    let f1_sim = weighted_matrix_norm(&diff, &g_w)?;
    let f2_lit = quadratic_form_pnorm(&q1_plus_i, &p0_ext)?;
    let f2_sim = weighted_matrix_norm(&q1_plus_i, &p0_ext)?;
    let (series_lit, series_sim) = weighted_power_series(&aug.scr_a1, &g_w)?;
    let c2_literal = f1_lit * f2_lit * series_lit;
    let c2_similarity = f1_sim * f2_sim * series_sim;
    let c2 = c2_literal.max(c2_similarity);

    // ‖Δ‖_P0: the z1 block of Δ is negative semidefinite, so the positive
    // part blockdiag(0, K0ᵀRK0) on [x; z0] is what the P0 form must cover.
    let delta_plus = embed(n + n0, n, &k0rk0);
    let delta_norm_literal = quadratic_form_pnorm(&delta_plus, &safety.p0)?;
    let delta_norm_similarity = weighted_matrix_norm(&delta_plus, &safety.p0)?;
    let delta_norm = delta_norm_literal.max(delta_norm_similarity);

    let switch_prob_decay_rate = escape_rate / (k_diff * k_diff);
    let gap_decay_rate = switch_prob_decay_rate / 4.0;

    Ok(EfficiencyCertificate {
        n_total: nn,
        m: cfg.threshold(),
        t: cfg.dwell(),
        rho,
        rho_escape,
        rho_inflated,
        q_cal,
        a0,
        k_diff,
        sigma,
        sigma_tilde,
        sigma_tilde_norm,
        p_norm,
        p_inv_norm,
        trace_sigma_p,
        trace_sigma_tilde_p,
        p0_pnorm,
        p0_sigma_tilde_inv_norm,
        fourth_moment_bound,
        escape_prefactor,
        escape_rate,
        c1,
        c2_literal,
        c2_similarity,
        c2,
        delta_norm_literal,
        delta_norm_similarity,
        delta_norm,
        q_scr1,
        delta,
        gap_decay_rate,
        switch_prob_decay_rate,
        valid_m: cfg.threshold() >= a0 * k_diff,
        valid_t: cfg.dwell() >= dwell.t_min,
        dwell,
        safety,
    })
}
