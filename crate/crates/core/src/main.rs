use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use txagg::cli::{
    self, cmd_bench, cmd_reduce_subset_sum, cmd_simulate, cmd_solve, cmd_verify, load_scenario,
    rows_to_csv, BenchOptions, CliError, ReportFile, SolveFlags,
};
use txagg::solver::{SolverChoice, DEFAULT_STATE_LIMIT};

#[derive(Parser)]
#[command(name = "txagg", version, about = "Aggregate payments in hub-based channel networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolveArgs {
    /// Scenario JSON, or `-` for standard input.
    scenario: PathBuf,
    /// brute, dp, dp-bounded or greedy.
    #[arg(long)]
    solver: Option<String>,
    /// State radius for dp-bounded.
    #[arg(long)]
    radius: Option<u64>,
    /// 64 hex characters of common randomness.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Select and route the best aggregate; no execution.
    Solve(SolveArgs),
    /// Run the whole round, including atomic execution.
    Simulate(SolveArgs),
    /// Check a report against its scenario.
    Verify { scenario: PathBuf, report: PathBuf },
    /// Emit a scenario deciding a subset-sum instance.
    ReduceSubsetSum {
        target: u64,
        #[arg(required = true)]
        items: Vec<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Time the solver on random hub-only instances (CSV).
    Bench {
        #[arg(long, default_value_t = 3)]
        hubs: usize,
        #[arg(long, default_value_t = 5)]
        delta: u64,
        #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000")]
        k_list: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Defaults to dp-bounded with radius hubs * delta.
        #[arg(long)]
        solver: Option<String>,
        #[arg(long)]
        radius: Option<u64>,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn prepare(args: &SolveArgs) -> Result<cli::Scenario, CliError> {
    let mut scenario = load_scenario(&args.scenario)?;
    let flags = SolveFlags {
        solver: args.solver.clone(),
        radius: args.radius,
        seed_hex: args.seed.clone(),
    };
    flags.apply(&mut scenario)?;
    Ok(scenario)
}

fn run(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Solve(args) => {
            let report = cmd_solve(&prepare(&args)?)?;
            emit(&report.to_json(), args.output.as_deref())?;
            Ok(cli::EXIT_OK)
        }
        Command::Simulate(args) => {
            let (report, committed) = cmd_simulate(&prepare(&args)?)?;
            emit(&report.to_json(), args.output.as_deref())?;
            if !committed {
                eprintln!("execution did not commit; balances were restored");
                return Ok(cli::EXIT_FAILED);
            }
            Ok(cli::EXIT_OK)
        }
        Command::Verify { scenario, report } => {
            let scenario = load_scenario(&scenario)?;
            let report = ReportFile::parse(&cli::read_input(&report)?)?;
            cmd_verify(&scenario, &report)?;
            Ok(cli::EXIT_OK)
        }
        Command::ReduceSubsetSum { target, items, output } => {
            let file = cmd_reduce_subset_sum(target, &items)?;
            emit(&file.to_json(), output.as_deref())?;
            Ok(cli::EXIT_OK)
        }
        Command::Bench { hubs, delta, k_list, seeds, solver, radius, repeat, output } => {
            let solver = match solver {
                Some(name) => Some(
                    SolverChoice::parse(&name, radius)
                        .map_err(|e| CliError::Invalid(e.to_string()))?,
                ),
                None => radius.map(|radius| SolverChoice::DpBounded { radius }),
            };
            let opts = BenchOptions {
                hubs,
                delta,
                k_list,
                seeds,
                solver,
                repeat,
                state_limit: DEFAULT_STATE_LIMIT,
            };
            let rows = cmd_bench(&opts)?;
            emit(&rows_to_csv(&rows), output.as_deref())?;
            Ok(cli::EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { cli::EXIT_INVALID } else { cli::EXIT_OK };
            return ExitCode::from(code as u8);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
