//! The switching state machine.
//!
//! Each step the supervisor computes both candidate inputs `u1 = K1 z1` and
//! `u0 = K0 z0`. While the dwell counter `ξ` is positive the fallback input
//! is applied unconditionally. Otherwise, if `‖u1 - u0‖ ≥ M` (inclusive:
//! ties trigger), the counter is set to the dwell time `t` and the fallback
//! input is applied in the same step; else the primary input is applied.
//! After the plant is stepped, *both* controller states are updated with the
//! applied input, and `ξ` decrements toward zero.
//!
//! The decision never inspects the plant state or measurement, only the two
//! candidate inputs.

use nalgebra::DVector;

use crate::model::DynamicController;
use crate::{Error, Result};

/// Switching threshold and dwell time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupervisorConfig {
    m: f64,
    t: usize,
}

impl SupervisorConfig {
    /// `m` must be positive (`f64::INFINITY` is the never-switch sentinel),
    /// `t` at least 1.
    // negated comparison so NaN is rejected
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(m: f64, t: usize) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::Dimension(format!(
                "switching threshold M must be positive, got {m}"
            )));
        }
        if t == 0 {
            return Err(Error::Dimension("dwell time t must be at least 1".into()));
        }
        Ok(Self { m, t })
    }

    pub fn threshold(&self) -> f64 {
        self.m
    }

    pub fn dwell(&self) -> usize {
        self.t
    }
}

/// Supervisor runtime state: the remaining-fallback counter and both
/// controller internal states.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisorState {
    /// Remaining steps on the dwell counter, `0 ≤ ξ ≤ t`.
    pub xi: usize,
    /// Fallback controller state `z0`.
    pub z0: DVector<f64>,
    /// Primary controller state `z1`.
    pub z1: DVector<f64>,
    /// Step index.
    pub k: usize,
}

impl SupervisorState {
    /// `ξ(0) = 0, z0(0) = 0, z1(0) = 0`.
    pub fn initial(n0: usize, n1: usize) -> Self {
        Self {
            xi: 0,
            z0: DVector::zeros(n0),
            z1: DVector::zeros(n1),
            k: 0,
        }
    }
}

/// Outcome of one supervisor decision.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDecision {
    /// The input actually applied this step.
    pub applied_input: DVector<f64>,
    pub used_primary: bool,
    /// True iff this step set `ξ ← t`.
    pub triggered: bool,
    /// Primary candidate `u1 = K1 z1`.
    pub u1: DVector<f64>,
    /// Fallback candidate `u0 = K0 z0`.
    pub u0: DVector<f64>,
}

impl StepDecision {
    /// `‖u1 - u0‖`, the quantity compared against the threshold.
    pub fn input_gap(&self) -> f64 {
        (&self.u1 - &self.u0).norm()
    }
}

fn check_dims(
    state: &SupervisorState,
    primary: &DynamicController,
    fallback: &DynamicController,
) -> Result<()> {
    if state.z1.len() != primary.state_dim() || state.z0.len() != fallback.state_dim() {
        return Err(Error::Dimension(format!(
            "supervisor state dimensions ({}, {}) do not match controllers ({}, {})",
            state.z0.len(),
            state.z1.len(),
            fallback.state_dim(),
            primary.state_dim()
        )));
    }
    if primary.k.nrows() != fallback.k.nrows() {
        return Err(Error::Dimension(
            "primary and fallback controllers disagree on the input dimension".into(),
        ));
    }
    Ok(())
}

/// One decision of the switching rule. Pure: the state is not modified.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // non-finite gap must trigger
pub fn decide(
    state: &SupervisorState,
    cfg: &SupervisorConfig,
    primary: &DynamicController,
    fallback: &DynamicController,
) -> Result<StepDecision> {
    check_dims(state, primary, fallback)?;
    let u1 = primary.output(&state.z1);
    let u0 = fallback.output(&state.z0);
    if state.xi > 0 {
        return Ok(StepDecision {
            applied_input: u0.clone(),
            used_primary: false,
            triggered: false,
            u1,
            u0,
        });
    }
    let gap = (&u1 - &u0).norm();
    // `!(gap < M)` so a non-finite gap triggers: a primary with unstable
    // internal dynamics can legitimately overflow its idle state while the
    // fallback runs, and the true pre-overflow gap is astronomically large.
    // The infinite-threshold sentinel never triggers.
    if cfg.threshold().is_finite() && !(gap < cfg.threshold()) {
        Ok(StepDecision {
            applied_input: u0.clone(),
            used_primary: false,
            triggered: true,
            u1,
            u0,
        })
    } else {
        Ok(StepDecision {
            applied_input: u1.clone(),
            used_primary: true,
            triggered: false,
            u1,
            u0,
        })
    }
}

/// End-of-step update: both internal states advance with the *applied*
/// input and the measurement `y(k)`; the counter is reloaded on a trigger
/// and decremented otherwise.
pub fn advance(
    state: &SupervisorState,
    decision: &StepDecision,
    cfg: &SupervisorConfig,
    primary: &DynamicController,
    fallback: &DynamicController,
    y: &DVector<f64>,
) -> Result<SupervisorState> {
    check_dims(state, primary, fallback)?;
    if y.len() != primary.l.ncols() {
        return Err(Error::Dimension(format!(
            "measurement has length {}, expected {}",
            y.len(),
            primary.l.ncols()
        )));
    }
    let u = &decision.applied_input;
    let z1 = primary.step(&state.z1, u, y);
    let z0 = fallback.step(&state.z0, u, y);
    // a trigger sets ξ ← t within the step and the end-of-step decrement
    // still applies, so fallback runs for t steps counting the trigger step
    let xi = if decision.triggered {
        cfg.dwell() - 1
    } else {
        state.xi.saturating_sub(1)
    };
    Ok(SupervisorState { xi, z0, z1, k: state.k + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ControllerLabel, DynamicController};
    use crate::testutil::{rand_matrix, rng};
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    #[allow(clippy::too_many_arguments)]
    fn ctrl(
        a: &[f64],
        na: usize,
        b: &[f64],
        m: usize,
        l: &[f64],
        p: usize,
        k: &[f64],
        label: ControllerLabel,
    ) -> DynamicController {
        DynamicController::new(
            DMatrix::from_row_slice(na, na, a),
            DMatrix::from_row_slice(na, m, b),
            DMatrix::from_row_slice(na, p, l),
            DMatrix::from_row_slice(m, na, k),
            label,
        )
        .unwrap()
    }

    fn simple_pair() -> (DynamicController, DynamicController) {
        // both 2-state, 2 inputs, 1 output
        let primary = ctrl(
            &[0.5, 0.1, 0.0, 0.4],
            2,
            &[0.2, 0.0, 0.0, 0.2],
            2,
            &[1.0, 0.5],
            1,
            &[1.0, 0.0, 0.0, 1.0],
            ControllerLabel::Primary,
        );
        let fallback = ctrl(
            &[0.3, 0.0, 0.0, 0.3],
            2,
            &[0.1, 0.0, 0.0, 0.1],
            2,
            &[0.5, 0.25],
            1,
            &[0.5, 0.0, 0.0, 0.5],
            ControllerLabel::Fallback,
        );
        (primary, fallback)
    }

    #[test]
    fn counter_active_forces_fallback() {
        let (primary, fallback) = simple_pair();
        let cfg = SupervisorConfig::new(1e-6, 4).unwrap();
        let mut state = SupervisorState::initial(2, 2);
        state.xi = 3;
        state.z1 = DVector::from_vec(vec![100.0, 100.0]);
        let d = decide(&state, &cfg, &primary, &fallback).unwrap();
        assert!(!d.used_primary);
        assert!(!d.triggered);
        assert_eq!(d.applied_input, d.u0);
    }

    #[test]
    fn tie_at_threshold_triggers() {
        let (primary, fallback) = simple_pair();
        // u1 = (3,4), u0 = 0: gap is exactly 5
        let cfg = SupervisorConfig::new(5.0, 2).unwrap();
        let mut state = SupervisorState::initial(2, 2);
        state.z1 = DVector::from_vec(vec![3.0, 4.0]);
        let d = decide(&state, &cfg, &primary, &fallback).unwrap();
        assert_eq!(d.input_gap(), 5.0);
        assert!(d.triggered);
        assert!(!d.used_primary);
        assert_eq!(d.applied_input, d.u0);
    }

    #[test]
    fn equal_candidates_use_primary() {
        let (primary, fallback) = simple_pair();
        let cfg = SupervisorConfig::new(0.5, 2).unwrap();
        let state = SupervisorState::initial(2, 2);
        let d = decide(&state, &cfg, &primary, &fallback).unwrap();
        assert!(d.used_primary);
        assert_eq!(d.applied_input, d.u1);
    }

    #[test]
    fn trigger_reloads_counter_and_countdown_reaches_zero() {
        let (primary, fallback) = simple_pair();
        let cfg = SupervisorConfig::new(5.0, 3).unwrap();
        let mut state = SupervisorState::initial(2, 2);
        state.z1 = DVector::from_vec(vec![3.0, 4.0]);
        let y = DVector::zeros(1);

        let d = decide(&state, &cfg, &primary, &fallback).unwrap();
        assert!(d.triggered);
        state = advance(&state, &d, &cfg, &primary, &fallback, &y).unwrap();
        // ξ was set to t = 3 and decremented at end of step
        assert_eq!(state.xi, 2);
        assert_eq!(state.k, 1);

        // two more fallback steps complete the 3-step dwell block
        for expected in [1, 0] {
            let d = decide(&state, &cfg, &primary, &fallback).unwrap();
            assert!(!d.used_primary);
            assert!(!d.triggered);
            state = advance(&state, &d, &cfg, &primary, &fallback, &y).unwrap();
            assert_eq!(state.xi, expected);
        }
        // at xi = 0 the threshold test runs again
        let d = decide(&state, &cfg, &primary, &fallback).unwrap();
        assert!(d.used_primary || d.triggered);
    }

    #[test]
    fn zero_controllers_update_from_measurement_only() {
        let l_only = ctrl(
            &[0.0],
            1,
            &[0.0, 0.0],
            2,
            &[2.0],
            1,
            &[0.0, 0.0],
            ControllerLabel::Fallback,
        );
        let cfg = SupervisorConfig::new(1.0, 1).unwrap();
        let state = SupervisorState::initial(1, 1);
        let d = decide(&state, &cfg, &l_only, &l_only).unwrap();
        let y = DVector::from_vec(vec![3.0]);
        let next = advance(&state, &d, &cfg, &l_only, &l_only, &y).unwrap();
        assert_eq!(next.z0[0], 6.0);
        assert_eq!(next.z1[0], 6.0);
    }

    #[test]
    fn identical_controllers_never_switch() {
        let (primary, _) = simple_pair();
        let fallback = DynamicController { label: ControllerLabel::Fallback, ..primary.clone() };
        let cfg = SupervisorConfig::new(1e-12, 5).unwrap();
        let mut state = SupervisorState::initial(2, 2);
        let mut r = rng(21);
        for _ in 0..200 {
            let d = decide(&state, &cfg, &primary, &fallback).unwrap();
            assert!(d.used_primary, "identical candidates must not trigger");
            let y = DVector::from_vec(vec![r.random::<f64>() - 0.5]);
            state = advance(&state, &d, &cfg, &primary, &fallback, &y).unwrap();
        }
    }

    /// Straight-line transcription of the switching pseudocode on raw
    /// vectors, no supervisor types involved. Used as the equivalence oracle.
    pub(crate) fn oracle_run(
        primary: &DynamicController,
        fallback: &DynamicController,
        m: f64,
        t: usize,
        ys: &[DVector<f64>],
    ) -> Vec<(bool, bool, DVector<f64>, usize)> {
        let mut xi: usize = 0;
        let mut z1 = DVector::<f64>::zeros(primary.state_dim());
        let mut z0 = DVector::<f64>::zeros(fallback.state_dim());
        let mut log = Vec::new();
        for y in ys {
            let u1 = &primary.k * &z1;
            let u0 = &fallback.k * &z0;
            let u;
            let used_primary;
            let mut triggered = false;
            if xi > 0 {
                u = u0.clone();
                used_primary = false;
            } else if (&u1 - &u0).norm() >= m {
                xi = t;
                u = u0.clone();
                used_primary = false;
                triggered = true;
            } else {
                u = u1.clone();
                used_primary = true;
            }
            z1 = &primary.a * &z1 + &primary.b * &u + &primary.l * y;
            z0 = &fallback.a * &z0 + &fallback.b * &u + &fallback.l * y;
            xi = xi.saturating_sub(1);
            log.push((used_primary, triggered, u, xi));
        }
        log
    }

    #[test]
    fn matches_straight_line_oracle_bit_exactly() {
        let mut r = rng(99);
        for trial in 0..300 {
            let n1 = 1 + (trial % 3);
            let n0 = 1 + (trial % 2);
            let m_in = 1 + (trial % 2);
            let p = 1 + (trial % 3);
            let primary = DynamicController::new(
                rand_matrix(&mut r, n1, n1, 0.4),
                rand_matrix(&mut r, n1, m_in, 0.4),
                rand_matrix(&mut r, n1, p, 0.4),
                rand_matrix(&mut r, m_in, n1, 0.8),
                ControllerLabel::Primary,
            )
            .unwrap();
            let fallback = DynamicController::new(
                rand_matrix(&mut r, n0, n0, 0.4),
                rand_matrix(&mut r, n0, m_in, 0.4),
                rand_matrix(&mut r, n0, p, 0.4),
                rand_matrix(&mut r, m_in, n0, 0.8),
                ControllerLabel::Fallback,
            )
            .unwrap();
            let m = 0.05 + r.random::<f64>();
            let t = 1 + (r.random::<u32>() % 6) as usize;
            let ys: Vec<DVector<f64>> = (0..100)
                .map(|_| DVector::from_fn(p, |_, _| r.random::<f64>() * 2.0 - 1.0))
                .collect();

            let oracle = oracle_run(&primary, &fallback, m, t, &ys);

            let cfg = SupervisorConfig::new(m, t).unwrap();
            let mut state = SupervisorState::initial(n0, n1);
            for (step, y) in ys.iter().enumerate() {
                let d = decide(&state, &cfg, &primary, &fallback).unwrap();
                let (o_used, o_trig, o_u, o_xi) = &oracle[step];
                assert_eq!(d.used_primary, *o_used, "trial {trial} step {step}");
                assert_eq!(d.triggered, *o_trig, "trial {trial} step {step}");
                assert_eq!(&d.applied_input, o_u, "trial {trial} step {step}");
                state = advance(&state, &d, &cfg, &primary, &fallback, y).unwrap();
                assert_eq!(state.xi, *o_xi, "trial {trial} step {step}");
            }
        }
    }

    #[test]
    fn dwell_contract_on_synthetic_traces() {
        // after a trigger at step k, fallback is applied for exactly steps
        // k..k+t-1 and the threshold test runs again at k+t
        let mut r = rng(123);
        for _ in 0..50 {
            let (primary, fallback) = simple_pair();
            let t = 1 + (r.random::<u32>() % 5) as usize;
            let cfg = SupervisorConfig::new(0.4, t).unwrap();
            let mut state = SupervisorState::initial(2, 2);
            let mut fallback_run = 0usize;
            for _ in 0..400 {
                let d = decide(&state, &cfg, &primary, &fallback).unwrap();
                if d.triggered {
                    assert_eq!(fallback_run, 0, "trigger only fires when the counter is free");
                }
                if d.used_primary {
                    assert_eq!(
                        fallback_run, 0,
                        "primary resumed before the dwell block completed"
                    );
                } else {
                    if d.triggered {
                        fallback_run = t;
                    }
                    assert!(fallback_run > 0, "untriggered fallback outside a dwell block");
                    fallback_run -= 1;
                }
                let y = DVector::from_vec(vec![r.random::<f64>() * 4.0 - 2.0]);
                state = advance(&state, &d, &cfg, &primary, &fallback, &y).unwrap();
            }
        }
    }

    #[test]
    fn non_finite_gap_triggers_under_finite_threshold() {
        let (primary, fallback) = simple_pair();
        let cfg = SupervisorConfig::new(5.0, 2).unwrap();
        let mut state = SupervisorState::initial(2, 2);
        state.z1 = DVector::from_vec(vec![f64::INFINITY, f64::NAN]);
        let d = decide(&state, &cfg, &primary, &fallback).unwrap();
        assert!(d.triggered);
        assert!(!d.used_primary);
        assert!(d.applied_input.iter().all(|v| v.is_finite()));

        // the infinite-threshold sentinel still never triggers
        let cfg_inf = SupervisorConfig::new(f64::INFINITY, 2).unwrap();
        let d = decide(&state, &cfg_inf, &primary, &fallback).unwrap();
        assert!(d.used_primary);
    }

    #[test]
    fn config_validation() {
        assert!(SupervisorConfig::new(0.0, 1).is_err());
        assert!(SupervisorConfig::new(-1.0, 1).is_err());
        assert!(SupervisorConfig::new(f64::NAN, 1).is_err());
        assert!(SupervisorConfig::new(1.0, 0).is_err());
        assert!(SupervisorConfig::new(f64::INFINITY, 1).is_ok());
    }
}
