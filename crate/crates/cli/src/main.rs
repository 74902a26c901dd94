use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

#[derive(Parser, Debug)]
#[command(version, about = "Relay FDIA detector pipeline: gen, train, attack, defend, eval, sweep")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML experiment config; defaults are used for anything not given.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Global seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// mlp, cnn, lstm, resnet or all.
    #[arg(long, global = true, default_value = "all")]
    pub arch: String,

    /// Attack epsilon; overrides the config.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,

    /// Maximum FGSM iterations; overrides the config.
    #[arg(long, global = true)]
    pub iters: Option<usize>,

    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the corpus and write the stratified train/test split.
    Gen,
    /// Train detectors on the clean training set.
    Train,
    /// Attack the test set and write the adversarial test set and report.
    Attack {
        /// Checkpoint to attack instead of `<out>/models/<arch>.ckpt`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Adversarially retrain detectors and report paired metrics.
    Defend {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score a checkpoint on a dataset directory.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Dataset directory; defaults to `<out>/data/test`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Fooling rate across the configured epsilon list.
    Sweep {
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = commands::Context::new(&cli.common).and_then(|ctx| match cli.command {
        Command::Gen => ctx.gen(),
        Command::Train => ctx.train(),
        Command::Attack { model } => ctx.attack(model),
        Command::Defend { model } => ctx.defend(model),
        Command::Eval { model, dataset } => ctx.eval(model, dataset),
        Command::Sweep { model } => ctx.sweep(model),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = commands::category(&e);
            eprintln!("error ({category}): {e:#}");
            ExitCode::from(commands::exit_code(category))
        }
    }
}
