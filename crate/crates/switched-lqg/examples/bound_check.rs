//! Run the empirical validation battery: every theoretical bound against
//! seeded Monte Carlo statistics of the actual closed loop.
//!
//! ```text
//! cargo run --example bound_check
//! ```

use switched_lqg::cli::{bound_check_rows, BoundCheckOptions, CheckStatus, ExperimentConfig, ModelSource};

fn main() -> switched_lqg::Result<()> {
    let mut cfg = ExperimentConfig::new(ModelSource::Generate {
        seed: 42,
        n: 3,
        m: 2,
        p: 2,
        rho: 0.85,
    });
    cfg.m = 1.0;
    cfg.t = 10;
    cfg.horizon = 1000;
    cfg.n_traj = 300;

    let (rows, ok) = bound_check_rows(&cfg, &BoundCheckOptions::default())?;
    println!("{:<28} {:>14} {:>14} {:>14}  status", "bound", "theoretical", "empirical", "margin");
    for r in &rows {
        let status = match &r.status {
            CheckStatus::Pass => "PASS".to_string(),
            CheckStatus::Fail => "FAIL".to_string(),
            CheckStatus::Skipped(reason) => format!("SKIPPED({reason})"),
        };
        println!(
            "{:<28} {:>14.4e} {:>14.4e} {:>14.4e}  {status}",
            r.name, r.theoretical, r.empirical, r.margin
        );
    }
    println!("\noverall: {}", if ok { "all bounds hold" } else { "VIOLATION" });

    // the threshold grows past the escape-argument validity edge, so every
    // efficiency row becomes checkable (and trivially tight: nothing ever
    // triggers out there)
    let resolved = switched_lqg::cli::resolve_model(&cfg)?;
    let eff = switched_lqg::certify::efficiency_certificate(
        &resolved.system,
        &resolved.primary,
        &resolved.fallback,
        &switched_lqg::supervisor::SupervisorConfig::new(cfg.m, cfg.t)?,
    )?;
    cfg.m = eff.a0 * eff.k_diff;
    cfg.t = cfg.t.max(eff.dwell.t_min);
    println!("\nre-running inside the validity region (M = {:.3e}, t = {}):", cfg.m, cfg.t);
    let (rows, ok) = bound_check_rows(&cfg, &BoundCheckOptions::default())?;
    for r in &rows {
        let status = match &r.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped(_) => "SKIPPED",
        };
        println!("{:<28} {status}", r.name);
    }
    println!("\noverall: {}", if ok { "all bounds hold" } else { "VIOLATION" });
    Ok(())
}
