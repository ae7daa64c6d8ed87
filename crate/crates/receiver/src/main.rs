use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rydberg_receiver::cli::{
    exit_code, load_config, run_optimize, run_sweep, write_optimize, write_sweep, RunConfig,
};
use rydberg_receiver::optimize::Problem;
use rydberg_receiver::validate;

#[derive(Parser)]
#[command(
    name = "rydberg-receiver",
    version,
    about = "Heterodyne Rydberg receiver model: susceptibility sweeps and detuning optimization"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    P1,
    P2,
    P3,
    P4,
    P5,
}

impl From<ProblemArg> for Problem {
    fn from(p: ProblemArg) -> Problem {
        match p {
            ProblemArg::P1 => Problem::P1,
            ProblemArg::P2 => Problem::P2,
            ProblemArg::P3 => Problem::P3,
            ProblemArg::P4 => Problem::P4,
            ProblemArg::P5 => Problem::P5,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one axis and write the susceptibility/conversion table.
    Sweep {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output path (overrides the config's output.path).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one optimization problem and write the JSON report.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// Which problem to solve.
        #[arg(long)]
        problem: ProblemArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the closed-form-vs-oracle suite and print pass/fail per check.
    Validate {
        /// Optional JSON run configuration (defaults to the built-in
        /// cesium parameter set).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(args: Args) -> rydberg_receiver::Result<()> {
    match args.command {
        Command::Sweep { config, out } => {
            let config = load_config(&config)?;
            let result = run_sweep(&config)?;
            let path = write_sweep(&result, &config, out.as_deref())?;
            eprintln!(
                "wrote {} rows ({} scenario) to {}",
                result.rows.len(),
                result.meta.scenario,
                path.display()
            );
            Ok(())
        }
        Command::Optimize {
            config,
            problem,
            out,
        } => {
            let config = load_config(&config)?;
            let output = run_optimize(&config, problem.into())?;
            let path = write_optimize(&output, &config, out.as_deref())?;
            eprintln!(
                "{:?}: optimum {:.6} MHz, gain {:.3} dB -> {}",
                output.report.problem,
                output.optimum_mhz,
                output.report.gain_db,
                path.display()
            );
            Ok(())
        }
        Command::Validate { config } => {
            let config = match config {
                Some(path) => load_config(&path)?,
                None => RunConfig::default(),
            };
            let outcomes = validate::run_all(&config)?;
            let mut all_passed = true;
            for o in &outcomes {
                let status = if o.passed { "PASS" } else { "FAIL" };
                println!(
                    "{status}: {} (max deviation {:.3e}, tolerance {:.3e})",
                    o.name, o.max_deviation, o.tolerance
                );
                if !o.passed {
                    println!("      {}", o.detail);
                    all_passed = false;
                }
            }
            if all_passed {
                Ok(())
            } else {
                Err(rydberg_receiver::Error::Numerical {
                    what: "validation suite reported failures".into(),
                    value: outcomes.iter().filter(|o| !o.passed).count() as f64,
                })
            }
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
