use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use finsler_lab::{run_file, CliError, Overrides};

#[derive(Parser)]
#[command(name = "finsler-lab", version, about = "Finsler connection, curvature and concircular-field checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of a TOML configuration and write the JSON report.
    Run {
        config: PathBuf,
        #[arg(long)]
        tol_abs: Option<f64>,
        #[arg(long)]
        tol_rel: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        points: Option<usize>,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the shipped metric families.
    Families,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Families => {
            for (name, about) in finsler_core::metric::shipped_families() {
                println!("{name:<12} {about}");
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            tol_abs,
            tol_rel,
            seed,
            points,
            out,
        } => {
            let overrides = Overrides {
                tol_abs,
                tol_rel,
                seed,
                points,
            };
            let report = match run_file(&config, &overrides) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let json = report.to_json();
            match out {
                Some(path) => {
                    if let Err(source) = std::fs::write(&path, json) {
                        let e = CliError::Io {
                            path: path.display().to_string(),
                            source,
                        };
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                }
                None => print!("{json}"),
            }
            for f in &report.summary.failures {
                eprintln!("failed: {f}");
            }
            ExitCode::from(report.exit_code())
        }
    }
}
