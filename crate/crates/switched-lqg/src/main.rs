use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use switched_lqg::cli::{
    cmd_certify, cmd_check, cmd_compare, cmd_sweep, cmd_synth, BoundCheckOptions, RawSettings,
};

/// Switching supervision for partially observed linear-Gaussian systems:
/// simulation, certificates and Monte Carlo bound validation.
#[derive(Parser)]
#[command(name = "switched-lqg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the assumption report and every available certificate
    Certify(CommonArgs),
    /// Seed-matched trajectory comparison with and without switching
    Compare(CommonArgs),
    /// Paired Monte Carlo sweep of the performance gap over a threshold grid
    Sweep(CommonArgs),
    /// Validate every theoretical bound against seeded simulation
    Check(CommonArgs),
    /// Generate a model with synthesized controllers and save it
    Synth(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Config file with `key = value` lines; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Load the plant (and controllers, if present) from a model file
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    /// Generate a random stable plant: seed,n,m,p,rho
    #[arg(long, value_name = "SPEC")]
    gen: Option<String>,
    /// Switching threshold
    #[arg(long = "M", value_name = "M")]
    m: Option<f64>,
    /// Threshold grid for sweep: lo:hi:steps (log-spaced)
    #[arg(long = "M-grid", value_name = "GRID")]
    m_grid: Option<String>,
    /// Dwell time
    #[arg(long)]
    t: Option<usize>,
    /// Rollout horizon
    #[arg(long = "T", value_name = "STEPS")]
    horizon: Option<usize>,
    /// Trajectories per Monte Carlo estimate
    #[arg(long)]
    traj: Option<usize>,
    /// Base seed; trajectory i uses seed + i
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replace both noises by zeros
    #[arg(long)]
    zero_noise: bool,
    /// All-ones shift detuning the primary controller
    #[arg(long)]
    lambda: Option<f64>,
}

impl CommonArgs {
    fn settings(&self) -> RawSettings {
        RawSettings {
            model: self.model.clone(),
            generate: self.gen.clone(),
            m: self.m,
            m_grid: self.m_grid.clone(),
            t: self.t,
            horizon: self.horizon,
            n_traj: self.traj,
            seed: self.seed,
            out: self.out.clone(),
            zero_noise: self.zero_noise.then_some(true),
            lambda: self.lambda,
        }
    }
}

fn run() -> switched_lqg::Result<i32> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            return Ok(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return Ok(0);
        }
    };
    let (args, run): (&CommonArgs, fn(&switched_lqg::cli::ExperimentConfig) -> switched_lqg::Result<i32>) =
        match &cli.command {
            Command::Certify(a) => (a, cmd_certify),
            Command::Compare(a) => (a, cmd_compare),
            Command::Sweep(a) => (a, cmd_sweep),
            Command::Check(a) => (a, |cfg| cmd_check(cfg, &BoundCheckOptions::default())),
            Command::Synth(a) => (a, cmd_synth),
        };
    let file_settings = match &args.config {
        Some(path) => RawSettings::from_file(path)?,
        None => RawSettings::default(),
    };
    let cfg = file_settings.overridden_by(args.settings()).into_config()?;
    run(&cfg)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
