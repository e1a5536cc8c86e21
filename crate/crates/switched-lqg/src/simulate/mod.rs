//! Seeded closed-loop rollouts, Monte Carlo aggregation and diagnostics.
//!
//! Rollouts simulate `x(k+1) = Ax(k) + Bu(k) + w(k)`, `y(k) = Cx(k) + v(k)`
//! with the supervisor deciding `u(k)` each step (or a single controller for
//! the unswitched baseline). Switched and unswitched rollouts consume the
//! noise stream identically, so seed-matched pairs share the exact same
//! `(w, v)` realization — the common-random-numbers pairing that makes the
//! tiny performance gaps of large thresholds resolvable at desk scale.

mod noise;

pub use noise::NoiseStream;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::matops::{solve_dlyap, spectral_radius, SpdMatrix};
use crate::model::{DynamicController, SystemModel};
use crate::supervisor::{advance, decide, SupervisorConfig, SupervisorState};
use crate::{Error, Result};

/// State-norm level that terminates a rollout as diverged.
pub const OVERFLOW_LIMIT: f64 = 1e150;

/// Knobs shared by all rollout flavors.
#[derive(Debug, Clone, Default)]
pub struct RolloutOptions {
    /// Keep per-step arrays and augmented states. Required by
    /// [`extract_transformed`] and the CSV dumps.
    pub record_trajectory: bool,
    /// Replace both noises by zeros (the noise-free limit).
    pub zero_noise: bool,
    /// Steps excluded from the front of the cost average (stationary-cost
    /// comparisons). The default 0 matches the Cesàro cost definition.
    pub burn_in: usize,
    /// Weight for the safety Lyapunov statistics: when set, the rollout
    /// accumulates `V0(k) = ‖[x; z0]‖²_P0` (its mean, the maximum of its
    /// running mean, and the mean of its square).
    pub p0_weight: Option<SpdMatrix>,
}

/// Per-step data kept when `record_trajectory` is on.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `‖x(k)‖` for each simulated step.
    pub state_norms: Vec<f64>,
    /// `x(k)ᵀQx(k) + u(k)ᵀRu(k)`.
    pub stage_costs: Vec<f64>,
    pub applied_primary: Vec<bool>,
    /// `‖u1(k) - u0(k)‖` (zero for unswitched rollouts).
    pub u_diff_norms: Vec<f64>,
    /// Augmented states `[x; z0; z1]` (switched) or `[x; z]` (unswitched).
    pub aug_states: Vec<DVector<f64>>,
}

/// Everything measured on one rollout.
#[derive(Debug, Clone)]
pub struct RolloutResult {
    pub horizon: usize,
    /// Steps actually simulated; less than `horizon` only on divergence.
    pub completed: usize,
    /// Average stage cost over the recorded (post-burn-in) steps.
    pub empirical_cost: f64,
    /// Fraction of steps on which the applied input was not the primary one.
    pub fallback_fraction: f64,
    pub max_state_norm: f64,
    /// Steps at which the supervisor set `ξ ← t`.
    pub trigger_steps: Vec<usize>,
    /// Step index at which the overflow guard fired, if it did.
    pub diverged_at: Option<usize>,
    pub noise_checksum: u64,
    /// Mean of `V0(k)` (needs `p0_weight`).
    pub mean_v0: Option<f64>,
    /// `max_k (1/(k+1)) Σ_{j≤k} V0(j)` (needs `p0_weight`).
    pub max_running_mean_v0: Option<f64>,
    /// Mean of `V0(k)²`, i.e. the empirical fourth moment `‖[x;z0]‖⁴_P0`
    /// (needs `p0_weight`).
    pub fourth_moment_p0: Option<f64>,
    pub trajectory: Option<Trajectory>,
}

struct StatsAccumulator {
    burn_in: usize,
    cost_sum: f64,
    cost_count: usize,
    fallback_steps: usize,
    steps: usize,
    max_state_norm: f64,
    v0_sum: f64,
    v0_sq_sum: f64,
    max_running_mean_v0: f64,
    track_v0: bool,
    trajectory: Option<Trajectory>,
}

impl StatsAccumulator {
    fn new(opts: &RolloutOptions) -> Self {
        Self {
            burn_in: opts.burn_in,
            cost_sum: 0.0,
            cost_count: 0,
            fallback_steps: 0,
            steps: 0,
            max_state_norm: 0.0,
            v0_sum: 0.0,
            v0_sq_sum: 0.0,
            max_running_mean_v0: 0.0,
            track_v0: opts.p0_weight.is_some(),
            trajectory: opts.record_trajectory.then(|| Trajectory {
                state_norms: Vec::new(),
                stage_costs: Vec::new(),
                applied_primary: Vec::new(),
                u_diff_norms: Vec::new(),
                aug_states: Vec::new(),
            }),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        k: usize,
        state_norm: f64,
        stage_cost: f64,
        used_primary: bool,
        u_diff: f64,
        v0: Option<f64>,
        aug_state: impl FnOnce() -> DVector<f64>,
    ) {
        self.steps += 1;
        if k >= self.burn_in {
            self.cost_sum += stage_cost;
            self.cost_count += 1;
        }
        if !used_primary {
            self.fallback_steps += 1;
        }
        self.max_state_norm = self.max_state_norm.max(state_norm);
        if let Some(v0) = v0 {
            self.v0_sum += v0;
            self.v0_sq_sum += v0 * v0;
            let running = self.v0_sum / self.steps as f64;
            self.max_running_mean_v0 = self.max_running_mean_v0.max(running);
        }
        if let Some(traj) = &mut self.trajectory {
            traj.state_norms.push(state_norm);
            traj.stage_costs.push(stage_cost);
            traj.applied_primary.push(used_primary);
            traj.u_diff_norms.push(u_diff);
            traj.aug_states.push(aug_state());
        }
    }

    fn finish(
        self,
        horizon: usize,
        trigger_steps: Vec<usize>,
        diverged_at: Option<usize>,
        checksum: u64,
    ) -> RolloutResult {
        let steps = self.steps.max(1) as f64;
        RolloutResult {
            horizon,
            completed: self.steps,
            empirical_cost: if self.cost_count > 0 {
                self.cost_sum / self.cost_count as f64
            } else {
                f64::NAN
            },
            fallback_fraction: self.fallback_steps as f64 / steps,
            max_state_norm: self.max_state_norm,
            trigger_steps,
            diverged_at,
            noise_checksum: checksum,
            mean_v0: self.track_v0.then(|| self.v0_sum / steps),
            max_running_mean_v0: self.track_v0.then_some(self.max_running_mean_v0),
            fourth_moment_p0: self.track_v0.then(|| self.v0_sq_sum / steps),
            trajectory: self.trajectory,
        }
    }
}

fn quad_form(q: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (v.transpose() * q * v)[(0, 0)]
}

fn stacked(parts: &[&DVector<f64>]) -> DVector<f64> {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut at = 0;
    for p in parts {
        out.rows_mut(at, p.len()).copy_from(*p);
        at += p.len();
    }
    out
}

fn check_x0(sys: &SystemModel, x0: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    match x0 {
        None => Ok(DVector::zeros(sys.state_dim())),
        Some(v) => {
            if v.len() != sys.state_dim() {
                return Err(Error::Dimension(format!(
                    "x0 has length {}, expected {}",
                    v.len(),
                    sys.state_dim()
                )));
            }
            Ok(v.clone())
        }
    }
}

/// Closed loop under the supervisor. Runs for any controller pair, including
/// destabilizing primaries; the overflow guard terminates a diverging run
/// with the data collected so far rather than producing NaN.
#[allow(clippy::too_many_arguments)]
pub fn rollout_switched(
    sys: &SystemModel,
    primary: &DynamicController,
    fallback: &DynamicController,
    cfg: &SupervisorConfig,
    seed: u64,
    horizon: usize,
    x0: Option<&DVector<f64>>,
    opts: &RolloutOptions,
) -> Result<RolloutResult> {
    if horizon == 0 {
        return Err(Error::Dimension("horizon must be at least 1".into()));
    }
    primary.validate_for(sys)?;
    fallback.validate_for(sys)?;
    if let Some(p0) = &opts.p0_weight {
        if p0.dim() != sys.state_dim() + fallback.state_dim() {
            return Err(Error::Dimension(format!(
                "P0 weight is {}x{}, expected dimension {}",
                p0.dim(),
                p0.dim(),
                sys.state_dim() + fallback.state_dim()
            )));
        }
    }
    let mut x = check_x0(sys, x0)?;
    let mut stream = NoiseStream::new(seed, &sys.w, &sys.v)?.zero_noise(opts.zero_noise);
    let mut sup = SupervisorState::initial(fallback.state_dim(), primary.state_dim());
    let mut stats = StatsAccumulator::new(opts);
    let mut trigger_steps = Vec::new();
    let mut diverged_at = None;

    for k in 0..horizon {
        let norm_x = x.norm();
        if !norm_x.is_finite() || norm_x > OVERFLOW_LIMIT {
            stats.max_state_norm = stats.max_state_norm.max(norm_x);
            diverged_at = Some(k);
            break;
        }
        let d = decide(&sup, cfg, primary, fallback)?;
        if d.triggered {
            trigger_steps.push(k);
        }
        let stage = quad_form(&sys.q, &x) + quad_form(&sys.r, &d.applied_input);
        let v0 = opts
            .p0_weight
            .as_ref()
            .map(|p0| p0.quadratic_form(&stacked(&[&x, &sup.z0])));
        stats.record(k, norm_x, stage, d.used_primary, d.input_gap(), v0, || {
            stacked(&[&x, &sup.z0, &sup.z1])
        });

        let (w, v) = stream.next_pair();
        let y = &sys.c * &x + v;
        x = &sys.a * &x + &sys.b * &d.applied_input + w;
        sup = advance(&sup, &d, cfg, primary, fallback, &y)?;
    }

    Ok(stats.finish(horizon, trigger_steps, diverged_at, stream.checksum()))
}

/// Closed loop under a single controller (no supervision). Consumes the
/// noise stream exactly like [`rollout_switched`], so a seed-matched pair
/// shares its `(w, v)` realization.
pub fn rollout_unswitched(
    sys: &SystemModel,
    ctrl: &DynamicController,
    seed: u64,
    horizon: usize,
    x0: Option<&DVector<f64>>,
    opts: &RolloutOptions,
) -> Result<RolloutResult> {
    if horizon == 0 {
        return Err(Error::Dimension("horizon must be at least 1".into()));
    }
    ctrl.validate_for(sys)?;
    if let Some(p0) = &opts.p0_weight {
        if p0.dim() != sys.state_dim() + ctrl.state_dim() {
            return Err(Error::Dimension(format!(
                "P0 weight dimension {} does not match [x; z]",
                p0.dim()
            )));
        }
    }
    let mut x = check_x0(sys, x0)?;
    let mut stream = NoiseStream::new(seed, &sys.w, &sys.v)?.zero_noise(opts.zero_noise);
    let mut z = DVector::<f64>::zeros(ctrl.state_dim());
    let mut stats = StatsAccumulator::new(opts);
    let mut diverged_at = None;

    for k in 0..horizon {
        let norm_x = x.norm();
        if !norm_x.is_finite() || norm_x > OVERFLOW_LIMIT {
            stats.max_state_norm = stats.max_state_norm.max(norm_x);
            diverged_at = Some(k);
            break;
        }
        let u = ctrl.output(&z);
        let stage = quad_form(&sys.q, &x) + quad_form(&sys.r, &u);
        let v0 = opts
            .p0_weight
            .as_ref()
            .map(|p0| p0.quadratic_form(&stacked(&[&x, &z])));
        stats.record(k, norm_x, stage, true, 0.0, v0, || stacked(&[&x, &z]));

        let (w, v) = stream.next_pair();
        let y = &sys.c * &x + v;
        x = &sys.a * &x + &sys.b * &u + w;
        z = ctrl.step(&z, &u, &y);
    }

    Ok(stats.finish(horizon, Vec::new(), diverged_at, stream.checksum()))
}

/// Exact stationary LQ cost `tr(X_ss · Q_scr)` of the linear closed loop
/// `X(k+1) = scrA X(k) + W(k)`, `W ~ N(0, Σ)`, where `X_ss` solves the
/// forward Lyapunov equation. Serves as the Monte Carlo oracle.
pub fn estimate_cost_analytic(
    scr_a: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    q_scr: &DMatrix<f64>,
) -> Result<f64> {
    let rho = spectral_radius(scr_a)?;
    if rho >= 1.0 {
        return Err(Error::NotSchurStable(format!(
            "stationary cost undefined: closed-loop spectral radius {rho:.6} >= 1"
        )));
    }
    if q_scr.nrows() != scr_a.nrows() || q_scr.ncols() != scr_a.ncols() {
        return Err(Error::Dimension("cost weight must match the closed loop".into()));
    }
    let x_ss = solve_dlyap(scr_a, sigma)?;
    Ok((x_ss * q_scr).trace())
}

/// One seed-matched switched/unswitched pair.
#[derive(Debug, Clone)]
pub struct McPair {
    pub seed: u64,
    pub cost_switched: f64,
    pub cost_unswitched: f64,
    pub fallback_fraction: f64,
    pub fourth_moment_p0: Option<f64>,
    pub max_running_mean_v0: Option<f64>,
    pub diverged_switched: bool,
    pub diverged_unswitched: bool,
    pub noise_match: bool,
    pub trigger_count: usize,
}

/// Monte Carlo aggregate over seed-matched pairs.
#[derive(Debug, Clone)]
pub struct McAggregate {
    /// Pairs in trajectory-index order, including diverged ones.
    pub pairs: Vec<McPair>,
    /// Number of pairs where neither rollout diverged; the summary
    /// statistics below are computed over exactly these.
    pub clean_pairs: usize,
    pub diverged_switched: usize,
    pub diverged_unswitched: usize,
    pub mean_cost_switched: f64,
    pub mean_cost_unswitched: f64,
    /// Paired-difference estimate of `J - J1`.
    pub gap_estimate: f64,
    /// Standard error of the paired difference.
    pub gap_std_err: f64,
    pub mean_fallback_fraction: f64,
    pub mean_fourth_moment_p0: Option<f64>,
    /// Largest running mean of `V0` seen on any clean trajectory.
    pub max_running_mean_v0: Option<f64>,
}

/// Runs `n_traj` seed-matched pairs (seeds `base_seed + i`) of the switched
/// loop against the unswitched primary loop. Trajectories run in parallel;
/// the reduction is in trajectory-index order, so the aggregate does not
/// depend on scheduling. Diverged trajectories are kept in `pairs` as
/// flagged outliers and excluded from the means.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo(
    sys: &SystemModel,
    primary: &DynamicController,
    fallback: &DynamicController,
    cfg: &SupervisorConfig,
    n_traj: usize,
    horizon: usize,
    base_seed: u64,
    opts: &RolloutOptions,
) -> Result<McAggregate> {
    if n_traj == 0 {
        return Err(Error::Dimension("n_traj must be at least 1".into()));
    }
    let mut run_opts = opts.clone();
    run_opts.record_trajectory = false;

    let results: Vec<Result<McPair>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            let sw = rollout_switched(sys, primary, fallback, cfg, seed, horizon, None, &run_opts)?;
            let un_opts = RolloutOptions { p0_weight: None, ..run_opts.clone() };
            let un = rollout_unswitched(sys, primary, seed, horizon, None, &un_opts)?;
            Ok(McPair {
                seed,
                cost_switched: sw.empirical_cost,
                cost_unswitched: un.empirical_cost,
                fallback_fraction: sw.fallback_fraction,
                fourth_moment_p0: sw.fourth_moment_p0,
                max_running_mean_v0: sw.max_running_mean_v0,
                diverged_switched: sw.diverged_at.is_some(),
                diverged_unswitched: un.diverged_at.is_some(),
                noise_match: sw.completed == un.completed
                    && sw.noise_checksum == un.noise_checksum,
                trigger_count: sw.trigger_steps.len(),
            })
        })
        .collect();

    let mut pairs = Vec::with_capacity(n_traj);
    for r in results {
        pairs.push(r?);
    }

    let clean: Vec<&McPair> = pairs
        .iter()
        .filter(|p| !p.diverged_switched && !p.diverged_unswitched)
        .collect();
    let nc = clean.len();
    let mean = |f: &dyn Fn(&McPair) -> f64| -> f64 {
        if nc == 0 {
            f64::NAN
        } else {
            clean.iter().map(|p| f(p)).sum::<f64>() / nc as f64
        }
    };
    let gap_estimate = mean(&|p| p.cost_switched - p.cost_unswitched);
    let gap_std_err = if nc >= 2 {
        let var = clean
            .iter()
            .map(|p| {
                let d = p.cost_switched - p.cost_unswitched - gap_estimate;
                d * d
            })
            .sum::<f64>()
            / (nc - 1) as f64;
        (var / nc as f64).sqrt()
    } else {
        0.0
    };
    let has_v0 = opts.p0_weight.is_some();

    Ok(McAggregate {
        clean_pairs: nc,
        diverged_switched: pairs.iter().filter(|p| p.diverged_switched).count(),
        diverged_unswitched: pairs.iter().filter(|p| p.diverged_unswitched).count(),
        mean_cost_switched: mean(&|p| p.cost_switched),
        mean_cost_unswitched: mean(&|p| p.cost_unswitched),
        gap_estimate,
        gap_std_err,
        mean_fallback_fraction: mean(&|p| p.fallback_fraction),
        mean_fourth_moment_p0: has_v0.then(|| mean(&|p| p.fourth_moment_p0.unwrap_or(f64::NAN))),
        max_running_mean_v0: has_v0.then(|| {
            clean
                .iter()
                .filter_map(|p| p.max_running_mean_v0)
                .fold(0.0f64, f64::max)
        }),
        pairs,
    })
}

/// Renders a recorded rollout as CSV with columns
/// `k,state_norm,applied_primary,stage_cost,u_diff_norm` (17 significant
/// digits, byte-stable across reruns).
pub fn trajectory_csv(r: &RolloutResult) -> Result<String> {
    use std::fmt::Write as _;
    let traj = r.trajectory.as_ref().ok_or_else(|| {
        Error::Unavailable("CSV dump needs a recorded trajectory (enable record_trajectory)".into())
    })?;
    let mut out = String::from("k,state_norm,applied_primary,stage_cost,u_diff_norm\n");
    for k in 0..r.completed {
        writeln!(
            out,
            "{k},{:.16e},{},{:.16e},{:.16e}",
            traj.state_norms[k],
            u8::from(traj.applied_primary[k]),
            traj.stage_costs[k],
            traj.u_diff_norms[k],
        )
        .unwrap();
    }
    Ok(out)
}

/// Transition label of one transformed step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepLabel {
    /// One primary step: `i(j+1) = i(j) + 1`.
    PrimaryStep,
    /// One whole fallback dwell block: `i(j+1) = i(j) + t`.
    FallbackBlock,
}

/// The subsampled trajectory in which each `t`-step fallback block is
/// collapsed into a single transition.
#[derive(Debug, Clone)]
pub struct TransformedTrace {
    /// Indices `i(j)` into the original trajectory.
    pub indices: Vec<usize>,
    /// Outgoing transition label of each index (the final one may be
    /// truncated by the end of the trajectory).
    pub labels: Vec<StepLabel>,
    /// Augmented states at the transformed indices.
    pub states: Vec<DVector<f64>>,
}

impl TransformedTrace {
    /// Mean of `(XᵀPX)²` over the transformed states.
    pub fn mean_v_squared(&self, p: &SpdMatrix) -> Result<f64> {
        if self.states.is_empty() {
            return Err(Error::Unavailable("transformed trace is empty".into()));
        }
        let mut sum = 0.0;
        for s in &self.states {
            if s.len() != p.dim() {
                return Err(Error::Dimension(
                    "weight dimension does not match transformed states".into(),
                ));
            }
            let v = p.quadratic_form(s);
            sum += v * v;
        }
        Ok(sum / self.states.len() as f64)
    }
}

/// Reconstructs the transformed sequence `i(0) = 0`,
/// `i(j+1) = i(j) + 1` on primary steps and `i(j) + t` on dwell blocks,
/// from a recorded switched rollout. Every fallback-labelled index must be a
/// supervisor trigger event; a mismatch means the dwell time passed here is
/// not the one the rollout used.
pub fn extract_transformed(result: &RolloutResult, cfg: &SupervisorConfig) -> Result<TransformedTrace> {
    let traj = result.trajectory.as_ref().ok_or_else(|| {
        Error::Unavailable(
            "transformed-sequence extraction needs a recorded trajectory \
             (enable record_trajectory)"
                .into(),
        )
    })?;
    let t = cfg.dwell();
    let mut indices = Vec::new();
    let mut labels = Vec::new();
    let mut states = Vec::new();
    let mut i = 0usize;
    while i < result.completed {
        let primary = traj.applied_primary[i];
        if !primary && result.trigger_steps.binary_search(&i).is_err() {
            return Err(Error::Unavailable(format!(
                "step {i} applied the fallback but is not a trigger event; \
                 dwell time {t} does not match the rollout"
            )));
        }
        indices.push(i);
        states.push(traj.aug_states[i].clone());
        if primary {
            labels.push(StepLabel::PrimaryStep);
            i += 1;
        } else {
            labels.push(StepLabel::FallbackBlock);
            i += t;
        }
    }
    Ok(TransformedTrace { indices, labels, states })
}
