use std::path::PathBuf;
use std::sync::atomic::Ordering;

use clap::{Parser, Subcommand};
use mtp_amp_cli::commands::{cmd_limits, cmd_phase_diagram, cmd_se, cmd_simulate, cmd_stability};
use mtp_amp_cli::{CliError, Context, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mtp-amp", version = mtp_amp_cli::output::version(), about = "AMP experiments for matrix tensor product models")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON) or a manifest from a previous run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides MTP_AMP_OUT and the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for Monte Carlo trials.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Base seed; overrides amp.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Continue an interrupted phase diagram from its CSV.
    #[arg(long, global = true)]
    resume: bool,

    /// Stop after this many new phase-diagram points (exit status 4).
    #[arg(long, global = true, hide = true)]
    stop_after: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Monte Carlo AMP runs with per-iteration means and standard errors.
    Simulate,
    /// State-evolution trajectory and fixed point.
    Se,
    /// Stability verdicts at zero and at the SE fixed point.
    Stability,
    /// Variational MMSE bounds along the sweep.
    Limits,
    /// AMP, SE and bounds over the (ε, c) sweep.
    PhaseDiagram,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = ExperimentConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        config.amp.seed = seed;
    }
    let out = cli
        .out
        .or_else(|| std::env::var_os("MTP_AMP_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&config.output.dir));
    config.output.dir = out.to_string_lossy().into_owned();
    let mut ctx = Context::new(config, out);
    ctx.jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    ctx.resume = cli.resume;
    ctx.stop_after = cli.stop_after;
    let flag = ctx.interrupt.clone();
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
        log::warn!("no interrupt handler: {e}");
    }
    let written = match cli.command {
        Command::Simulate => cmd_simulate(&ctx)?,
        Command::Se => cmd_se(&ctx)?,
        Command::Stability => cmd_stability(&ctx)?.0,
        Command::Limits => cmd_limits(&ctx)?,
        Command::PhaseDiagram => cmd_phase_diagram(&ctx)?,
    };
    println!("{}", written.display());
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
