//! Command-line front end: frequency scans, resonance search, double-barrier
//! decomposition reports, wavefunction dumps and the self-validation suite.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};

use commands::{cmd_decompose, cmd_resonances, cmd_scan, cmd_validate, cmd_wavefunction, Context};
use config::{OutputFormat, RunConfig};

#[derive(Parser)]
#[command(
    name = "nbarrier",
    about = "Scattering and phase-time analysis of N equally spaced rectangular barriers",
    version
)]
struct Cli {
    /// JSON run configuration; built-in defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<String>,

    /// Output path override; "-" writes to stdout.
    #[arg(long, global = true)]
    output: Option<String>,

    /// Output format override.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    /// Worker threads for scans (0 = auto).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Relative finite-difference step for phase times.
    #[arg(long = "fd-step", global = true, default_value_t = 1e-6)]
    fd_step: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frequency scan: one row per omega with amplitudes, probabilities and tau.
    Scan,
    /// Locate transmission resonances and report their time budgets.
    Resonances,
    /// Double-barrier partial-coefficient report (requires N = 2).
    Decompose {
        /// Evaluation frequency; defaults to the scan midpoint.
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Run every registered invariant check and exit nonzero on failure.
    Validate,
    /// Dump the piecewise stationary solution over an x window.
    Wavefunction {
        #[arg(long)]
        omega: f64,
        #[arg(long, allow_hyphen_values = true)]
        x_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        x_max: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut config = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(message) => {
                eprintln!("{message}");
                std::process::exit(2);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(path) = &cli.output {
        config.output.path = path.clone();
    }
    if let Some(format) = cli.format {
        config.output.format = format;
    }
    if !(cli.fd_step > 0.0 && cli.fd_step < 1.0) {
        eprintln!("--fd-step must lie in (0, 1), got {}", cli.fd_step);
        std::process::exit(2);
    }

    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        log::warn!("thread pool already initialized: {e}");
    }

    let ctx = Context {
        config,
        fd_step: cli.fd_step,
    };
    let result = match cli.command {
        Command::Scan => cmd_scan(&ctx),
        Command::Resonances => cmd_resonances(&ctx),
        Command::Decompose { omega } => cmd_decompose(&ctx, omega),
        Command::Validate => cmd_validate(&ctx),
        Command::Wavefunction {
            omega,
            x_min,
            x_max,
            points,
        } => cmd_wavefunction(&ctx, omega, x_min, x_max, points),
    };

    if let Err(e) = result {
        if let Some(message) = e.message() {
            eprintln!("{message}");
        }
        std::process::exit(e.code());
    }
}
