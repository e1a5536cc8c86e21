//! Desk-scale sweep of the switching cost gap against the threshold M:
//! paired Monte Carlo with common random numbers resolves gaps far below
//! the single-run noise floor, and the gap collapses to exactly zero once
//! M exceeds the largest input disagreement the noise can produce.
//!
//! ```text
//! cargo run --release --example gap_sweep
//! ```

use switched_lqg::certify::efficiency_certificate;
use switched_lqg::model::{
    random_stable_system, synth_optimal_controller, zero_fallback, AugmentedSystem,
};
use switched_lqg::simulate::{estimate_cost_analytic, monte_carlo, RolloutOptions};
use switched_lqg::supervisor::SupervisorConfig;

fn main() -> switched_lqg::Result<()> {
    let sys = random_stable_system(5000, 4, 2, 2, 0.85)?;
    let primary = synth_optimal_controller(&sys)?;
    let fallback = zero_fallback(&sys)?;
    let t = 10;

    let eff = efficiency_certificate(&sys, &primary, &fallback, &SupervisorConfig::new(1.0, t)?)?;
    let aug = AugmentedSystem::new(&sys, &primary, &fallback)?;
    let j1 = estimate_cost_analytic(&aug.scr_a1, &aug.sigma, &eff.q_scr1)?;
    println!("analytic primary-loop cost J1 = {j1:.6}");
    println!("\n     M | relative gap (J-J1)/J1 |   std err | fallback fraction");

    let (n_traj, horizon) = (400, 800);
    let mut m = 0.6;
    while m <= 6.0 {
        let sup = SupervisorConfig::new(m, t)?;
        let agg = monte_carlo(
            &sys,
            &primary,
            &fallback,
            &sup,
            n_traj,
            horizon,
            42,
            &RolloutOptions::default(),
        )?;
        println!(
            "{m:>6.3} | {:>22.6e} | {:>9.2e} | {:>17.5}",
            agg.gap_estimate / j1,
            agg.gap_std_err / j1,
            agg.mean_fallback_fraction
        );
        m *= 1.45;
    }

    println!("\nanalytic gap bound decay rate in M^2: {:.4e}", eff.gap_decay_rate);
    println!("(the bound's validity region starts at M = a0*K = {:.4e})", eff.a0 * eff.k_diff);
    Ok(())
}
