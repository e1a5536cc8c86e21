//! Compute every certificate for a generated system and print the report.
//!
//! ```text
//! cargo run --example certificates
//! ```

use switched_lqg::certify::{
    check_assumptions, dwell_certificate, efficiency_certificate, safety_certificate,
    CertificateReport,
};
use switched_lqg::model::{random_stable_system, synth_optimal_controller, zero_fallback};
use switched_lqg::supervisor::SupervisorConfig;

fn main() -> switched_lqg::Result<()> {
    // a 4-state plant with 2 inputs and 3 outputs, open-loop stable so the
    // trivial u = 0 fallback qualifies
    let sys = random_stable_system(2024, 4, 2, 3, 0.9)?;
    let fallback = zero_fallback(&sys)?;
    let primary = synth_optimal_controller(&sys)?;

    let assumptions = check_assumptions(&sys, &primary, &fallback)?;
    println!("assumption 1 (fallback side): {}", assumptions.assumption1);
    println!("assumption 2 (primary side):  {}", assumptions.assumption2);

    let safety = safety_certificate(&sys, &fallback, 1.0)?;
    println!("\nsafety: rho0 = {:.6}", safety.rho0);
    println!("safety: LQ cost bound at M = 1: {:.4e}", safety.cost_bound);
    println!("safety: the bound holds for ANY primary controller");

    let dwell = dwell_certificate(&sys, &primary, &fallback)?;
    println!("\ndwell: rho = {:.6}, minimal dwell time t_min = {}", dwell.rho, dwell.t_min);

    let cfg = SupervisorConfig::new(1.0, dwell.t_min.max(10))?;
    let eff = efficiency_certificate(&sys, &primary, &fallback, &cfg)?;
    println!("\nefficiency: K = {:.4}, a0 = {:.4e}", eff.k_diff, eff.a0);
    println!("efficiency: validity edge a0*K = {:.4e}", eff.a0 * eff.k_diff);
    println!(
        "efficiency: gap bound at (M, t) = ({}, {}): {:.4e}",
        eff.m,
        eff.t,
        eff.gap_bound(eff.m, eff.t)
    );
    println!(
        "efficiency: log gap bound decays with slope -{:.4e} in M^2",
        eff.gap_decay_rate
    );

    let report = CertificateReport {
        assumptions,
        safety: Some(safety),
        dwell: Some(dwell),
        efficiency: Some(eff),
    };
    println!("\nfull report:\n{}", report.to_text());
    Ok(())
}
