//! `ecpid` batch runner.
//!
//! Exit codes: 0 success, 1 validation error, 2 at least one run diverged,
//! 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ecpid_core::config::{parse_config, ControllerKind, ScenarioKind};
use ecpid_core::experiment::{format_sig, run_experiment, ExitStatus};

#[derive(Parser)]
#[command(
    name = "ecpid",
    version,
    about = "Closed-loop EC-PIDUNN / PID experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment enumerated by a config file.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ControllerArg {
    Classical,
    #[value(name = "ec_pidunn")]
    EcPidunn,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Vehicle,
    #[value(name = "pan_tilt")]
    PanTilt,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Network seed; replaces any seed sweep.
    #[arg(long)]
    seed: Option<u64>,
    /// Run a single controller instead of the configured comparison set.
    #[arg(long, value_enum)]
    controller: Option<ControllerArg>,
    /// Select the scenario section to run.
    #[arg(long, value_enum)]
    scenario: Option<ScenarioArg>,
}

fn exit(status: ExitStatus) -> ExitCode {
    ExitCode::from(status.code() as u8)
}

fn run(args: RunArgs) -> ExitCode {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return exit(ExitStatus::IoError);
        }
    };
    let mut spec = match parse_config(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return exit(ExitStatus::ValidationError);
        }
    };
    if let Some(seed) = args.seed {
        spec.override_seed(seed);
    }
    if let Some(c) = args.controller {
        spec.override_controller(match c {
            ControllerArg::Classical => ControllerKind::Classical,
            ControllerArg::EcPidunn => ControllerKind::EcPidunn,
        });
    }
    if let Some(s) = args.scenario {
        spec.override_scenario(match s {
            ScenarioArg::Vehicle => ScenarioKind::Vehicle,
            ScenarioArg::PanTilt => ScenarioKind::PanTilt,
        });
    }
    if let Err(e) = spec.validate() {
        eprintln!("error: {e}");
        return exit(ExitStatus::ValidationError);
    }
    let out = args.out.unwrap_or_else(|| PathBuf::from(&spec.output.dir));

    let outcome = match run_experiment(&spec, &out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit(ExitStatus::IoError);
        }
    };

    let cell = |v: Option<f64>| v.map(format_sig).unwrap_or_else(|| "-".to_string());
    println!(
        "{:<32} {:<9} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "run", "loop", "rise", "settling", "overshoot%", "ss_error", "rms"
    );
    for run in &outcome.runs {
        match &run.result {
            Ok(rows) => {
                for r in rows {
                    let m = &r.metrics;
                    println!(
                        "{:<32} {:<9} {:>12} {:>12} {:>12} {:>12} {:>12}",
                        r.run_id,
                        r.loop_name,
                        cell(m.rise_time),
                        cell(m.settling_time),
                        cell(m.overshoot_pct),
                        cell(m.steady_state_error),
                        cell(m.rms_tracking_error)
                    );
                }
            }
            Err(e) => eprintln!("run {} failed: {e}", run.run.id),
        }
    }
    println!("summary: {}", outcome.summary_path.display());
    exit(outcome.status())
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
    }
}
