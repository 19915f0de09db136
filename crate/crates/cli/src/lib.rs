//! Command-line driver for reproducible embedding experiments.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::EvalTask;
use config::{ExperimentConfig, Overrides};

#[derive(Debug, Parser)]
#[command(name = "semkge", version, about = "Train and evaluate semantically enhanced knowledge graph embeddings")]
pub struct Cli {
    /// Experiment config file (flat TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TransE, TransR, TransE+TXT, TransE+AFF, TransE+CK or TransE+ALL.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// fixed or variable.
    #[arg(long, global = true)]
    pub setting: Option<String>,
    /// l1 or l2.
    #[arg(long, global = true)]
    pub norm: Option<String>,
    /// total or knowledge.
    #[arg(long, global = true)]
    pub score_mode: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split the triple file per relation into train/valid/test.
    Split,
    /// Build and align the semantic vectors used by the model.
    Prepare,
    /// Train the model and write a checkpoint and log.
    Train,
    /// Evaluate a checkpoint on the test split.
    Eval {
        /// concept, relation or classify.
        #[arg(long)]
        task: String,
        /// Defaults to the run's checkpoint under the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Retrofit the prepared TXT vectors to the training graph.
    Retrofit,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            model: self.model.clone(),
            setting: self.setting.clone(),
            norm: self.norm.clone(),
            score_mode: self.score_mode.clone(),
        }
    }

    pub fn load_config(&self) -> semkge::Result<ExperimentConfig> {
        match &self.config {
            Some(path) => ExperimentConfig::load(path, &self.overrides()),
            None => ExperimentConfig::from_toml("", std::path::Path::new(""), &self.overrides()),
        }
    }
}

pub fn run(cli: &Cli) -> semkge::Result<()> {
    let config = cli.load_config()?;
    match &cli.command {
        Command::Split => commands::cmd_split(&config).map(drop),
        Command::Prepare => commands::cmd_prepare(&config).map(drop),
        Command::Train => commands::cmd_train(&config).map(drop),
        Command::Eval { task, checkpoint } => {
            let task: EvalTask = task.parse()?;
            commands::cmd_eval(&config, task, checkpoint.as_deref()).map(drop)
        }
        Command::Retrofit => commands::cmd_retrofit(&config).map(drop),
    }
}
