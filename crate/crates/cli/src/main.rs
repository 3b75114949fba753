use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use insnav::config::{load_config, ProfileName, RunConfig};
use insnav::eval::Variant;
use insnav::io::{load_dataset, DatasetPaths};
use insnav::pipeline::{export_simulation, run_batch, summary_table, Mode, RunPlan};
use insnav::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "insnav",
    version,
    about = "INS/GNSS filtering with GNSS-derived acceleration updates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one scenario, run the filter variants and export the dataset to <out>/data.
    Simulate(Common),
    /// Run the filter variants over a recorded dataset directory.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Directory holding imu.csv, gnss.csv and truth.csv (overrides `dataset_dir`).
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Monte-Carlo batch of simulated repetitions with consecutive seeds.
    Batch(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Base seed (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// Filter variant(s) to run.
    #[arg(long, value_enum, default_value_t = VariantChoice::Both)]
    variant: VariantChoice,
    /// Number of repetitions (overrides the configuration).
    #[arg(long)]
    reps: Option<usize>,
    /// Trajectory profile (overrides the configuration).
    #[arg(long, value_parser = parse_profile)]
    profile: Option<ProfileName>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum VariantChoice {
    Baseline,
    Accel,
    Both,
}

impl VariantChoice {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantChoice::Baseline => vec![Variant::Baseline],
            VariantChoice::Accel => vec![Variant::AccelAided],
            VariantChoice::Both => Variant::ALL.to_vec(),
        }
    }
}

fn parse_profile(s: &str) -> std::result::Result<ProfileName, String> {
    s.parse()
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(reps) = self.reps {
            config.repetitions = reps;
        }
        if let Some(profile) = self.profile {
            config.profile = profile;
        }
        config.validate()?;
        Ok(config)
    }

    fn plan(&self, mode: Mode, config: RunConfig, repetitions: usize) -> RunPlan {
        RunPlan {
            mode,
            variants: self.variant.variants(),
            repetitions,
            config,
            out_dir: self.out.clone(),
        }
    }
}

fn run(cli: Cli) -> Result<String> {
    let (plan, replay) = match &cli.command {
        Command::Simulate(common) => {
            let config = common.config()?;
            export_simulation(&config, config.seed, &common.out.join("data"))?;
            let reps = common.reps.unwrap_or(1);
            (common.plan(Mode::Simulate, config, reps), None)
        }
        Command::Batch(common) => {
            let config = common.config()?;
            let reps = config.repetitions;
            (common.plan(Mode::Simulate, config, reps), None)
        }
        Command::Replay { common, dataset } => {
            let config = common.config()?;
            let dir = dataset
                .clone()
                .or_else(|| config.dataset_dir.clone())
                .ok_or_else(|| Error::ConfigField {
                    field: "dataset_dir".into(),
                    message: "replay needs --dataset or dataset_dir".into(),
                })?;
            let bundle = load_dataset(&DatasetPaths::in_dir(&dir))?;
            (common.plan(Mode::Replay, config, 1), Some(bundle))
        }
    };
    let output = run_batch(&plan, replay.as_ref())?;
    Ok(summary_table(&output))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(table) => {
            print!("{table}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
