use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser};
use optospring::runner::{self, Overrides, Scenario};

/// Stroboscopic squeezing of a mechanical resonator under periodic optical kicks.
#[derive(Parser, Debug)]
#[command(name = "optospring", version)]
#[command(group(ArgGroup::new("input").required(true).args(["config", "scenario"])))]
struct Cli {
    /// Run configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Built-in preset: fig1, fig2 or fig3.
    #[arg(long, value_name = "NAME")]
    scenario: Option<Scenario>,

    /// Trajectory CSV path; the summary and intra-period files go next to it.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Base seed for ensemble runs.
    #[arg(long)]
    seed: Option<u64>,

    /// Number of ensemble trajectories.
    #[arg(long)]
    trajectories: Option<usize>,

    /// Number of kicks to simulate.
    #[arg(long)]
    kicks: Option<u64>,

    /// Record every `stride`-th kick.
    #[arg(long)]
    stride: Option<u64>,

    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    // Usage errors count as validation errors; 2 is reserved for numerical failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let overrides = Overrides {
        out: cli.out,
        seed: cli.seed,
        trajectories: cli.trajectories,
        kicks: cli.kicks,
        stride: cli.stride,
    };
    let result = match (cli.scenario, cli.config) {
        (Some(s), _) => runner::run_scenario(s, &overrides),
        (None, Some(path)) => runner::run_config_file(&path, &overrides),
        (None, None) => unreachable!("clap enforces one input"),
    };
    match result {
        Ok(outcome) => {
            if !cli.quiet {
                print!("{}", outcome.summary.to_text());
                println!("# wrote {}", outcome.csv.display());
                println!("# wrote {}", outcome.summary_path.display());
                if let Some(p) = &outcome.intra {
                    println!("# wrote {}", p.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
