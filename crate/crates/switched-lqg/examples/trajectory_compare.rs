//! Seed-matched comparison of the supervised and unsupervised closed loop
//! under a destabilizing primary controller: without switching the state
//! norm grows without bound, with switching it stays small.
//!
//! ```text
//! cargo run --example trajectory_compare
//! ```

use switched_lqg::matops::spectral_radius;
use switched_lqg::model::{
    build_scr_a1, perturb_controller, random_stable_system, synth_optimal_controller,
    zero_fallback,
};
use switched_lqg::simulate::{rollout_switched, RolloutOptions};
use switched_lqg::supervisor::SupervisorConfig;

fn main() -> switched_lqg::Result<()> {
    let sys = random_stable_system(7, 4, 2, 3, 0.85)?;
    let fallback = zero_fallback(&sys)?;
    let optimal = synth_optimal_controller(&sys)?;

    // detune the optimal controller until the primary closed loop is
    // marginally unstable
    let mut lambda = 0.01;
    let primary = loop {
        let cand = perturb_controller(&optimal, lambda);
        let rho = spectral_radius(&build_scr_a1(&sys, &cand, &fallback)?)?;
        if rho > 1.02 {
            println!("perturbation lambda = {lambda:.4}: rho(primary mode) = {rho:.4}");
            break cand;
        }
        lambda *= 1.3;
    };

    let seed = 1;
    let horizon = 2000;
    let supervised = SupervisorConfig::new(1.0, 10)?;
    let disabled = SupervisorConfig::new(f64::INFINITY, 10)?;
    let opts = RolloutOptions { record_trajectory: true, ..Default::default() };

    let with_sw = rollout_switched(&sys, &primary, &fallback, &supervised, seed, horizon, None, &opts)?;
    let without = rollout_switched(&sys, &primary, &fallback, &disabled, seed, horizon, None, &opts)?;

    println!("\n    k | with switching | without switching");
    let traj_sw = with_sw.trajectory.as_ref().unwrap();
    let traj_un = without.trajectory.as_ref().unwrap();
    for k in (0..horizon).step_by(100) {
        let sw = traj_sw.state_norms.get(k).copied().unwrap_or(f64::NAN);
        let un = traj_un.state_norms.get(k).copied().unwrap_or(f64::INFINITY);
        println!("{k:>5} | {sw:>14.4} | {un:>17.4e}");
    }

    println!("\nmax state norm with switching:    {:.4}", with_sw.max_state_norm);
    println!("max state norm without switching: {:.4e}", without.max_state_norm);
    println!("fallback fraction: {:.3}", with_sw.fallback_fraction);
    println!("triggers: {}", with_sw.trigger_steps.len());
    if let Some(k) = without.diverged_at {
        println!("unsupervised loop hit the overflow guard at step {k}");
    }
    Ok(())
}
