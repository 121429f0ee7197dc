#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::CommonArgs;

#[derive(Debug, Parser)]
#[command(
    name = "fraclap",
    version,
    about = "Walk-on-Spheres solver and neural surrogate for the fractional Dirichlet problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw both radial laws and report KS distances against their CDFs
    Sample {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Generate a training set with the Monte Carlo estimator
    Dataset {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = fraclap::estimator::DEFAULT_SAMPLING_RADIUS)]
        sampling_radius: f64,
    },
    /// Train the network on a generated training set
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Defaults to OUT/dataset.csv
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Score a checkpoint against the exact solution and emit curve data
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// Defaults to OUT/checkpoint.json
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run dataset, train and evaluate over a grid of M, P and alpha
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_delimiter = ',', default_value = "10,100")]
        m_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "10,100")]
        p_list: Vec<usize>,
        /// Defaults to the single value of --alpha
        #[arg(long, value_delimiter = ',')]
        alpha_list: Vec<f64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Points sampled for MSE and MRE
    #[arg(long, default_value_t = 5000)]
    pub eval_points: usize,
    /// Radius of the ball the evaluation points are drawn from
    #[arg(long, default_value_t = 1.0)]
    pub eval_radius: f64,
    /// Points per side of the surface grid
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
}

fn main() -> ExitCode {
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
    let result = match cli.command {
        Command::Sample { common, samples } => commands::sample(&common, samples),
        Command::Dataset {
            common,
            sampling_radius,
        } => commands::dataset(&common, sampling_radius),
        Command::Train { common, dataset } => commands::train(&common, dataset),
        Command::Evaluate {
            common,
            eval,
            checkpoint,
        } => commands::evaluate(&common, &eval, checkpoint),
        Command::Sweep {
            common,
            eval,
            m_list,
            p_list,
            alpha_list,
        } => commands::sweep(&common, &eval, &m_list, &p_list, &alpha_list),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
