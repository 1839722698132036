use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qshare::{run_scenario, secrecy, sweep, CliError, EXIT_INPUT_ERROR};

#[derive(Parser)]
#[command(name = "qshare", version, about = "Dealer-free quantum threshold secret sharing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report
    Run {
        scenario: PathBuf,
        /// Report path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
        /// Write the final global state, one term per line
        #[arg(long)]
        dump_state: Option<PathBuf>,
    },
    /// Run every scenario matching a glob
    Sweep {
        pattern: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check that small share coalitions learn nothing
    Secrecy {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: Option<u64>,
        #[arg(long)]
        subset_size: usize,
    },
}

fn write(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
}

fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Run { scenario, out, seed, dump_state } => {
            let output = run_scenario(&scenario, seed)?;
            let json = output.report.to_json();
            match out {
                Some(path) => write(&path, &json)?,
                None => print!("{json}"),
            }
            if let (Some(path), Some(state)) = (dump_state, &output.state) {
                write(&path, &state.to_string())?;
            }
            Ok(output.report.exit_code)
        }
        Command::Sweep { pattern, jobs } => {
            let rows = sweep(&pattern, jobs)?;
            let failed = rows.iter().filter(|r| !r.passed).count();
            for row in &rows {
                println!("{}", row.line());
            }
            println!("{} scenarios, {} passed, {failed} failed", rows.len(), rows.len() - failed);
            Ok(if failed == 0 { 0 } else { 1 })
        }
        Command::Secrecy { k, n, q, subset_size } => {
            let report = secrecy(k, n, q, subset_size)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(if report.passed { 0 } else { 4 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT_ERROR as u8)
        }
    }
}
