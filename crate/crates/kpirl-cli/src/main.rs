use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kpirl_cli::commands::train_irl::{BaselineArg, VariantArg};
use kpirl_cli::commands::{self, Ctx};
use kpirl_cli::config::RunConfig;
use kpirl_cli::error::AppResult;

/// Pick-and-place experiments: collect demonstrations, learn dynamics and
/// costs, and evaluate the resulting controller.
#[derive(Parser)]
#[command(name = "kpirl", version, about)]
struct Cli {
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override every stage seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Replace outputs that already exist.
    #[arg(long, global = true)]
    overwrite: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect expert demonstrations and dynamics training data.
    Collect,
    /// Fit the keypoint dynamics model to collected transitions.
    TrainDynamics,
    /// Learn a trajectory cost from the demonstrations.
    TrainIrl {
        /// Cost family to fit, overriding the configuration.
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        /// Train a classic baseline instead of the gradient method.
        #[arg(long, value_enum)]
        baseline: Option<BaselineArg>,
        /// Continue from the saved optimizer state.
        #[arg(long)]
        resume: bool,
    },
    /// Learn an adversarial reward, value function, and policy.
    TrainAirl,
    /// Run the controller with the learned cost on fresh scenarios.
    Eval,
    /// Merge curve CSVs into one long-format file for plotting.
    PlotExport {
        /// Curve CSVs to merge.
        #[arg(required = true, value_name = "CSV")]
        inputs: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> AppResult<()> {
    let mut cfg = RunConfig::resolve(cli.config.as_deref(), cli.seed, cli.out.as_deref())?;
    // Subcommand flags that change the effective configuration land
    // before hashing so outputs carry the configuration actually run.
    if let Command::TrainIrl {
        variant: Some(v), ..
    } = &cli.command
    {
        cfg.irl.variant = (*v).into();
        cfg.validate()?;
    }
    let ctx = Ctx::new(cfg, cli.overwrite);
    match cli.command {
        Command::Collect => commands::collect::run(&ctx),
        Command::TrainDynamics => commands::train_dynamics::run(&ctx),
        Command::TrainIrl {
            baseline, resume, ..
        } => commands::train_irl::run(&ctx, baseline, resume),
        Command::TrainAirl => commands::train_airl::run(&ctx),
        Command::Eval => commands::eval::run(&ctx),
        Command::PlotExport { inputs } => commands::plot_export::run(&ctx, &inputs),
    }
}
