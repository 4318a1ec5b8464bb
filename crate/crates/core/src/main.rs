use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scpinn::bench::{bench_csv, bench_derivatives, BenchConfig};
use scpinn::nn::Activation;
use scpinn::runner::{cmd_inverse, cmd_solve, exit_code, sweep, RunOutcome};
use scpinn::{Error, Result};

#[derive(Parser)]
#[command(name = "scpinn", version, about = "Sobolev-cubature physics-informed neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a forward problem from a TOML configuration.
    Solve { config: PathBuf },
    /// Train an inverse problem (network plus unknown λ).
    Inverse { config: PathBuf },
    /// Time input derivatives by polynomial differentiation and by jets.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "50,50,50,50")]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value = "sin")]
        activation: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the CSV table to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every *.toml configuration in a directory.
    Sweep { dir: PathBuf },
}

fn report(outcome: &Result<RunOutcome>) -> i32 {
    match outcome {
        Ok(o) => {
            let r = &o.record;
            print!("{}: eps1={:.3e} eps_inf={:.3e}", o.output_dir.display(), r.eps1, r.eps_inf);
            if let (Some(l), Some(e)) = (r.lambda, r.eps_lambda) {
                print!(" lambda={l:.6e} eps_lambda={e:.3e}");
            }
            println!(" epochs={} time={:.2}s", r.epochs_run, r.wall_time_s);
            if let Some(d) = &r.divergence {
                eprintln!("diverged: {d}");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(outcome)
}

fn parse_activation(name: &str) -> Result<Activation> {
    serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| Error::Config(format!("unknown activation {name:?}")))
}

fn bench(cfg: BenchConfig, output: Option<PathBuf>) -> Result<()> {
    let csv = bench_csv(&bench_derivatives(&cfg)?);
    print!("{csv}");
    if let Some(path) = output {
        std::fs::write(path, csv)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Solve { config } => report(&cmd_solve(&config)),
        Command::Inverse { config } => report(&cmd_inverse(&config)),
        Command::Bench { hidden, points, order, reps, activation, seed, output } => {
            let run = parse_activation(&activation).and_then(|activation| {
                bench(BenchConfig { hidden, activation, points, order, reps, seed }, output)
            });
            match run {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    if matches!(e, Error::Io(_)) { 1 } else { 2 }
                }
            }
        }
        Command::Sweep { dir } => match sweep(&dir) {
            Ok(entries) => {
                let codes: Vec<i32> = entries
                    .iter()
                    .map(|e| {
                        print!("{}: ", e.config_path.display());
                        report(&e.outcome)
                    })
                    .collect();
                [2, 3, 1].into_iter().find(|c| codes.contains(c)).unwrap_or(0)
            }
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
    };
    ExitCode::from(code as u8)
}
