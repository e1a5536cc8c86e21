//! CLI contract tests: exit codes, file outputs, config-file layering and
//! the bound-check tamper hook. Command logic is exercised through the
//! library API; the installed binary is spawned where the process exit code
//! itself is the contract.

use std::process::Command;

use switched_lqg::cli::{
    bound_check_rows, cmd_certify, cmd_check, cmd_synth, BoundCheckOptions, CheckStatus,
    ExperimentConfig, ModelSource, RawSettings,
};

const BIN: &str = env!("CARGO_BIN_EXE_switched-lqg");

fn gen_cfg(out: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ModelSource::Generate {
        seed: 42,
        n: 3,
        m: 2,
        p: 2,
        rho: 0.85,
    });
    cfg.horizon = 400;
    cfg.n_traj = 60;
    cfg.out_dir = out.to_path_buf();
    cfg
}

#[test]
fn synth_then_certify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = gen_cfg(dir.path());
    assert_eq!(cmd_synth(&cfg).unwrap(), 0);
    let model_path = dir.path().join("model.lqg");
    assert!(model_path.exists());

    let mut cfg2 = gen_cfg(dir.path());
    cfg2.source = ModelSource::File(model_path);
    assert_eq!(cmd_certify(&cfg2).unwrap(), 0);
    let report = std::fs::read_to_string(dir.path().join("certificates.txt")).unwrap();
    assert!(report.contains("section efficiency"));
}

#[test]
fn certify_exit_2_when_primary_destabilizes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = gen_cfg(dir.path());
    cfg.lambda = Some(5.0);
    assert_eq!(cmd_certify(&cfg).unwrap(), 2);
    // the safety certificate is still emitted
    let report = std::fs::read_to_string(dir.path().join("certificates.txt")).unwrap();
    assert!(report.contains("section safety"));
    assert!(report.contains("cost_bound"));
    assert!(!report.contains("section efficiency"));
}

#[test]
fn binary_exit_codes() {
    // missing model file: usage/IO error
    let status = Command::new(BIN)
        .args(["certify", "--model", "/nonexistent/model.lqg"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));

    // unknown flag: usage error
    let status = Command::new(BIN).args(["certify", "--bogus"]).output().unwrap();
    assert_eq!(status.status.code(), Some(1));

    // destabilized primary: sweep refuses with exit 2
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(BIN)
        .args([
            "sweep",
            "--gen",
            "42,3,2,2,0.85",
            "--lambda",
            "5",
            "--traj",
            "5",
            "--T",
            "50",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));

    // happy path: compare exits 0 and writes its files
    let status = Command::new(BIN)
        .args(["compare", "--gen", "42,3,2,2,0.85", "--T", "200", "--seed", "9", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(dir.path().join("compare_switched.csv").exists());
    assert!(dir.path().join("compare_unswitched.csv").exists());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg_path,
        "# experiment settings\n\
         gen = 42,3,2,2,0.85\n\
         M = 2.5\n\
         t = 4\n\
         T = 123\n\
         traj = 7\n\
         seed = 99\n\
         zero-noise = true\n",
    )
    .unwrap();
    let file = RawSettings::from_file(&cfg_path).unwrap();
    let flags = RawSettings { m: Some(1.25), n_traj: Some(11), ..Default::default() };
    let cfg = file.overridden_by(flags).into_config().unwrap();
    assert_eq!(cfg.m, 1.25); // flag wins
    assert_eq!(cfg.n_traj, 11); // flag wins
    assert_eq!(cfg.t, 4); // from file
    assert_eq!(cfg.horizon, 123);
    assert_eq!(cfg.base_seed, 99);
    assert!(cfg.zero_noise);

    // unknown keys and missing sources are parse errors
    std::fs::write(&cfg_path, "bogus = 1\n").unwrap();
    assert!(RawSettings::from_file(&cfg_path).is_err());
    assert!(RawSettings::default().into_config().is_err());
}

#[test]
fn check_with_destabilizing_primary_skips_efficiency_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = gen_cfg(dir.path());
    cfg.lambda = Some(5.0);
    cfg.n_traj = 20;
    cfg.horizon = 300;
    let (rows, ok) = bound_check_rows(&cfg, &BoundCheckOptions::default()).unwrap();
    assert!(ok, "safety rows must still hold: {rows:?}");
    assert!(rows
        .iter()
        .any(|r| matches!(&r.status, CheckStatus::Skipped(s) if s == "assumption2")));
    assert_eq!(cmd_check(&cfg, &BoundCheckOptions::default()).unwrap(), 2);
}

#[test]
fn compare_with_infinite_threshold_writes_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = gen_cfg(dir.path());
    cfg.m = f64::INFINITY;
    cfg.horizon = 250;
    assert_eq!(switched_lqg::cli::cmd_compare(&cfg).unwrap(), 0);
    let a = std::fs::read(dir.path().join("compare_switched.csv")).unwrap();
    let b = std::fs::read(dir.path().join("compare_unswitched.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bound_check_all_rows_computed_inside_validity_region() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = gen_cfg(dir.path());
    cfg.n_traj = 40;
    cfg.horizon = 500;
    let resolved = switched_lqg::cli::resolve_model(&cfg).unwrap();
    let eff = switched_lqg::certify::efficiency_certificate(
        &resolved.system,
        &resolved.primary,
        &resolved.fallback,
        &switched_lqg::supervisor::SupervisorConfig::new(cfg.m, cfg.t).unwrap(),
    )
    .unwrap();
    cfg.m = eff.a0 * eff.k_diff;
    cfg.t = cfg.t.max(eff.dwell.t_min);
    let (rows, ok) = bound_check_rows(&cfg, &BoundCheckOptions::default()).unwrap();
    assert!(ok, "{rows:?}");
    assert!(
        rows.iter().all(|r| r.status == CheckStatus::Pass),
        "expected every row computed and passing: {rows:?}"
    );
    assert_eq!(rows.len(), 7);
}

#[test]
fn bound_check_tamper_hook_detects_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = gen_cfg(dir.path());

    // untampered battery passes
    let (rows, ok) = bound_check_rows(&cfg, &BoundCheckOptions::default()).unwrap();
    assert!(ok, "untampered battery failed: {rows:?}");

    // scaling every bound down must produce FAIL rows
    let (rows, ok) = bound_check_rows(&cfg, &BoundCheckOptions { bound_scale: 1e-12 }).unwrap();
    assert!(!ok);
    assert!(rows.iter().any(|r| r.status == CheckStatus::Fail));

    // and the command reports the failure through its exit code
    let mut cfg2 = gen_cfg(&dir.path().join("tampered"));
    cfg2.n_traj = 20;
    cfg2.horizon = 200;
    assert_eq!(cmd_check(&cfg2, &BoundCheckOptions { bound_scale: 1e-12 }).unwrap(), 1);
    assert_eq!(cmd_check(&cfg2, &BoundCheckOptions::default()).unwrap(), 0);
}
