use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use weakinv::scenario::{self, parse_values, sweep, write_sweep_csv, SCHEMA};
use weakinv::Error;

/// Weak-invariant laboratory for the damped oscillator with time-dependent coefficients.
#[derive(Parser)]
#[command(name = "weakinv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory, ermakov, invariant and spectrum CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `outputs.directory` of the scenario.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the check battery and print one line per check.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Vary one scalar field and print one CSV row per value.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted key path, e.g. `kappa.value` or `basis.dim`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Print every accepted key with its default.
    Schema,
}

const EXIT_CHECK: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config() || matches!(e, Error::Io(_)) { EXIT_CONFIG } else { EXIT_NUMERIC })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let start = Instant::now();
    let code = match cli.command {
        Command::Run { config, out } => match scenario::load_scenario(&config)
            .and_then(|s| scenario::run_scenario(&s, out.as_deref()))
        {
            Ok(summary) => {
                for f in &summary.files {
                    println!("{}", f.display());
                }
                let m = &summary.metrics;
                println!(
                    "records={} max_invariant_drift={:.3e} max_aux_residual={:.3e} final_mean_x={:.6}",
                    summary.records, m.max_invariant_drift, m.max_aux_residual, m.final_mean_x
                );
                ExitCode::SUCCESS
            }
            Err(e) => exit_for(&e),
        },
        Command::Verify { config } => match scenario::load_scenario(&config).and_then(|s| scenario::verify_scenario(&s)) {
            Ok(report) => {
                println!("{report}");
                if report.overall {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(EXIT_CHECK)
                }
            }
            Err(e) => exit_for(&e),
        },
        Command::Sweep { config, param, values } => {
            let result = scenario::load_scenario(&config).and_then(|s| {
                let rows = sweep(&s, &param, &parse_values(&values)?)?;
                let stdout = std::io::stdout();
                let mut w = stdout.lock();
                write_sweep_csv(&rows, s.outputs.csv_precision, &mut w)?;
                w.flush()?;
                Ok(())
            });
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => exit_for(&e),
            }
        }
        Command::Schema => {
            print!("{SCHEMA}");
            ExitCode::SUCCESS
        }
    };
    eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    code
}
