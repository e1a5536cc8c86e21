//! Step the switching state machine by hand on a tiny example and watch the
//! dwell counter work: a trigger holds the fallback for exactly t steps
//! (trigger step included), then the threshold test runs again.
//!
//! ```text
//! cargo run --example supervisor_walkthrough
//! ```

use nalgebra::{DMatrix, DVector};
use switched_lqg::model::{ControllerLabel, DynamicController};
use switched_lqg::supervisor::{advance, decide, SupervisorConfig, SupervisorState};

fn main() -> switched_lqg::Result<()> {
    // scalar controllers: the primary integrates the measurement, the
    // fallback always proposes zero input
    let primary = DynamicController::new(
        DMatrix::from_row_slice(1, 1, &[0.9]),
        DMatrix::from_row_slice(1, 1, &[0.0]),
        DMatrix::from_row_slice(1, 1, &[1.0]),
        DMatrix::from_row_slice(1, 1, &[1.0]),
        ControllerLabel::Primary,
    )?;
    let fallback = DynamicController::new(
        DMatrix::zeros(1, 1),
        DMatrix::zeros(1, 1),
        DMatrix::zeros(1, 1),
        DMatrix::zeros(1, 1),
        ControllerLabel::Fallback,
    )?;

    let cfg = SupervisorConfig::new(2.0, 3)?;
    println!("threshold M = {}, dwell time t = {}", cfg.threshold(), cfg.dwell());

    // a measurement burst drives the primary's candidate input above the
    // threshold at step 3
    let ys = [0.2, 0.3, 3.0, 0.1, 0.0, 0.0, 0.0, 0.1, 0.2, 0.0];
    let mut state = SupervisorState::initial(1, 1);

    println!("\n k |     u1 |   u0 | gap    | decision");
    for (k, yv) in ys.iter().enumerate() {
        let d = decide(&state, &cfg, &primary, &fallback)?;
        let what = if d.triggered {
            "TRIGGER -> fallback"
        } else if d.used_primary {
            "primary"
        } else {
            "fallback (dwell)"
        };
        println!(
            "{k:>2} | {:>6.3} | {:>4.1} | {:>6.3} | {what}",
            d.u1[0],
            d.u0[0],
            d.input_gap()
        );
        let y = DVector::from_vec(vec![*yv]);
        state = advance(&state, &d, &cfg, &primary, &fallback, &y)?;
    }
    Ok(())
}
