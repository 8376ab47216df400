use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uzawa_cli::commands::{self, Summary};
use uzawa_cli::{parse_config, CliError};
use uzawa_core::RhoRule;

#[derive(Parser)]
#[command(name = "deep-uzawa", version, about = "Deep Uzawa solver for elliptic optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network on the experiment in CONFIG and write its CSV files.
    Run {
        config: PathBuf,
        /// Output directory, overriding the `output` key.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the finite-difference Uzawa, projected, Gauss-Seidel and direct solvers.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check network gradients and Laplacians against finite differences.
    GradCheck,
    /// Repeat a run for each regularisation weight in ALPHAS.
    Sweep {
        config: PathBuf,
        /// Comma-separated list of α values.
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        /// Multiplier step as a fraction of α.
        #[arg(long, default_value_t = 0.25, conflicts_with = "rho")]
        rho_fraction: f64,
        /// Fixed multiplier step for every α.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn report(summary: Summary) {
    match summary {
        Summary::Run {
            updates,
            final_state_error,
            final_control_error,
        } => {
            println!("completed {updates} updates");
            if let (Some(s), Some(c)) = (final_state_error, final_control_error) {
                println!("relative L2 error: state {s:e}, control {c:e}");
            }
        }
        Summary::Oracle(schemes) => println!("wrote {}", schemes.join(", ")),
        Summary::Sweep(runs) => println!("completed {runs} runs"),
        Summary::Checks(lines) => {
            for line in lines {
                println!("ok  {:<32} {:.2e} (tolerance {:.0e})", line.name, line.error, line.tolerance);
            }
        }
    }
}

fn execute(command: Command) -> Result<Summary, CliError> {
    match command {
        Command::Run { config, out } => {
            let config = parse_config(&config)?;
            let out = out.unwrap_or_else(|| config.output.clone());
            let summary = commands::run(&config, &out)?;
            println!("outputs in {}", out.display());
            Ok(summary)
        }
        Command::Oracle { config, out } => {
            let config = parse_config(&config)?;
            let out = out.unwrap_or_else(|| config.output.clone());
            commands::oracle(&config, &out)
        }
        Command::GradCheck => commands::grad_check(),
        Command::Sweep {
            config,
            alphas,
            rho_fraction,
            rho,
            out,
        } => {
            let config = parse_config(&config)?;
            let out = out.unwrap_or_else(|| config.output.clone());
            let rule = match rho {
                Some(r) => RhoRule::Fixed(r),
                None => RhoRule::AlphaFraction(rho_fraction),
            };
            commands::sweep(&config, &alphas, rule, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(summary) => {
            report(summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
