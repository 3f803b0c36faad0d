use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use biofilm_cli::commands::{self, SweepArgs};
use biofilm_cli::config::parse_preset;
use biofilm_cli::{CliError, RunConfig, EXIT_INPUT};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "biofilm", version, about = "Four-phase biofilm balance law: dissipativity analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dissipativity report at the equilibrium (exit 3 if not dissipative).
    Analyze {
        #[arg(long)]
        config: Option<PathBuf>,
        /// table1, fast or custom; overrides the config.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Verdict sweep over the one-parameter rate family, written as CSV.
    Sweep {
        #[arg(long, allow_negative_numbers = true)]
        a_min: f64,
        #[arg(long, allow_negative_numbers = true)]
        a_max: f64,
        #[arg(long, allow_negative_numbers = true)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Friction coefficient M.
        #[arg(long, default_value_t = 1e-6)]
        friction: f64,
    },
    /// Run the solver; writes snapshots, trace.csv and run.meta into --out.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        preset: Option<String>,
    },
    /// Fit exponential H² decay to a trace (exit 3 if not decaying).
    Decay {
        trace: PathBuf,
        /// Window start as a fraction of the trace duration.
        #[arg(long, default_value_t = 0.5)]
        window_start: f64,
    },
}

fn load(config: Option<&PathBuf>, preset: Option<&str>) -> Result<RunConfig, CliError> {
    let mut cfg = match config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = preset {
        cfg.preset = parse_preset(p)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Analyze { config, preset } => {
            let cfg = load(config.as_ref(), preset.as_deref())?;
            commands::analyze(&cfg, &mut out)
        }
        Command::Sweep {
            a_min,
            a_max,
            step,
            out: path,
            gamma,
            friction,
        } => commands::sweep(
            &SweepArgs {
                a_min,
                a_max,
                step,
                gamma,
                friction,
            },
            &path,
            &mut out,
        ),
        Command::Simulate { config, out: dir, preset } => {
            let cfg = load(Some(&config), preset.as_deref())?;
            commands::simulate(&cfg, &dir, &mut out)
        }
        Command::Decay { trace, window_start } => commands::decay(&trace, window_start, &mut out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {e}");
            if let CliError::Aborted {
                diagnostic: Some(path), ..
            } = &e
            {
                eprintln!("diagnostic snapshot: {}", path.display());
            }
            ExitCode::from(e.exit_code())
        }
    }
}
