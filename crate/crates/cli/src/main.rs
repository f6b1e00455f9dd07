use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use relay_planner::{cmd_compare, cmd_evaluate, cmd_optimize, cmd_plot_data, PlanModel};

#[derive(Parser)]
#[command(name = "relay-planner", version, about = "Attitude-aware UAV relay trajectory planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModelArg {
    Aware,
    Agnostic,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the relay trajectory for a scenario.
    Optimize {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "aware")]
        model: ModelArg,
        /// Relay trajectory CSV.
        #[arg(long)]
        out: PathBuf,
        /// Solve report JSON.
        #[arg(long)]
        report: PathBuf,
    },
    /// Replay a relay trajectory under the exact dipole model.
    Evaluate {
        scenario: PathBuf,
        relay: PathBuf,
        /// Per-step trace CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize with both models and compare them under the exact model.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write tidy plotting tables from a trace CSV or a comparison report.
    PlotData {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Optimize {
            scenario,
            model,
            out,
            report,
        } => {
            let model = match model {
                ModelArg::Aware => PlanModel::Aware,
                ModelArg::Agnostic => PlanModel::Agnostic,
            };
            cmd_optimize(&scenario, model, &out, &report).map(|o| {
                if o.exit_code() != 0 {
                    eprintln!("trajectory violates the kinematic limits; see {}", report.display());
                }
                o.exit_code()
            })
        }
        Command::Evaluate { scenario, relay, out } => cmd_evaluate(&scenario, &relay, &out).map(|s| {
            println!("total_bits {} min_rate {}", s.total_bits, s.min_rate);
            0
        }),
        Command::Compare { scenario, out } => cmd_compare(&scenario, &out).map(|(r, o)| {
            if let (Some(t), Some(m)) = (r.improvement_total_pct, r.improvement_min_rate_pct) {
                println!("total improvement {t:.3}%");
                println!("min-rate improvement {m:.3}%");
            }
            o.exit_code()
        }),
        Command::PlotData { input, out } => cmd_plot_data(&input, &out).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
