use clap::{Parser, Subcommand};
use flr_cli::commands::{cmd_bench, cmd_denoise, cmd_fit, cmd_gen, BenchArgs, DenoiseArgs, FitArgs, GenArgs};
use flr_cli::CliError;

/// Fused lasso regression solvers and benchmarks.
#[derive(Debug, Parser)]
#[command(name = "flr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a scenario into a problem directory
    Gen(GenArgs),
    /// Fit one problem with one solver
    Fit(FitArgs),
    /// Run a benchmark suite and write a summary CSV
    Bench(BenchArgs),
    /// Denoise a square 8-bit PGM image
    Denoise(DenoiseArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Fit(a) => {
            let r = cmd_fit(&a)?;
            println!(
                "{}: {} after {} iterations, objective {}",
                r.solver,
                a.out.display(),
                r.iterations,
                r.final_objective
            );
            Ok(())
        }
        Command::Bench(a) => {
            let rows = cmd_bench(&a)?;
            let failed = rows.iter().filter(|r| r.rep.is_some() && r.error.is_some()).count();
            println!(
                "{} rows written to {} ({failed} failed runs)",
                rows.len(),
                a.out.display()
            );
            Ok(())
        }
        Command::Denoise(a) => cmd_denoise(&a).map(|_| ()),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("flr: {e}");
        std::process::exit(e.exit_code());
    }
}
