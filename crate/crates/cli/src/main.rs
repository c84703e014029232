use std::path::PathBuf;
use std::process::ExitCode;

use abreu_cli::run::{self, output_dir, require_passed};
use abreu_cli::{parse_config, CliError};
use abreu_core::AuditOutcome;
use clap::{Parser, Subcommand};

/// Penalized log-det barrier solver for convexity-constrained variational problems.
#[derive(Debug, Parser)]
#[command(name = "abreu", version)]
struct Cli {
    /// Output directory, overriding `output_dir` of the configuration.
    #[arg(long, global = true, env = "ABREU_OUTPUT_DIR")]
    output: Option<PathBuf>,

    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One penalized solve.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `schedule.eps0`.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Baseline, eps-continuation, audits, CSVs and figures.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// The directly constrained baseline alone.
    Baseline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-run the audits on the output of an earlier sweep.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Regenerate the figures of an earlier sweep.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn print_audits(audits: &[AuditOutcome]) {
    for a in audits {
        println!("{a}");
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let over = cli.output.as_deref();
    match cli.command {
        Command::Solve { config, eps } => {
            let cfg = parse_config(&config)?;
            let out = output_dir(&cfg, over);
            let (row, audits) = run::run_solve(&cfg, eps, &out)?;
            println!(
                "eps {:.6e}: {} iterations, J_eps {:.10e}, min det {:.4e}",
                row.eps, row.iters, row.jeps, row.min_det
            );
            print_audits(&audits);
            require_passed(&audits)
        }
        Command::Sweep { config } => {
            let cfg = parse_config(&config)?;
            let out = output_dir(&cfg, over);
            let bundle = run::run_sweep(&cfg, &out)?;
            for r in &bundle.rows {
                println!(
                    "eps {:.6e}: {:>3} iterations, err_K {}",
                    r.eps,
                    r.iters,
                    r.err_k.map_or("-".into(), |e| format!("{e:.4e}"))
                );
            }
            print_audits(&bundle.audits);
            println!("results in {}", out.display());
            require_passed(&bundle.audits)
        }
        Command::Baseline { config } => {
            let cfg = parse_config(&config)?;
            let out = output_dir(&cfg, over);
            let report = run::run_baseline(&cfg, &out)?;
            println!(
                "baseline: {} stages, J {:.10e}, min det {:.4e}",
                report.mu.len(),
                report.plain_j,
                report.min_det
            );
            Ok(())
        }
        Command::Audit { config, input } => {
            let cfg = parse_config(&config)?;
            let out = over.map_or_else(|| input.clone(), PathBuf::from);
            let audits = run::run_audit(&cfg, &input, &out)?;
            print_audits(&audits);
            require_passed(&audits)
        }
        Command::Report { input } => {
            let out = over.map_or_else(|| input.clone(), PathBuf::from);
            for f in run::run_report(&input, &out)? {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
