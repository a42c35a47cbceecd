//! Command-line plumbing: run configuration, synthetic dataset generation,
//! the ablation matrix, oracle checks and the subcommands built on them.

mod ablation;
pub mod checks;
mod commands;
mod config;
mod dataset;

pub use ablation::{
    ablation_matrix, format_ablation_table, mean_std, run_ablation, run_one, write_ablation_csv, AblationRow,
    RowSummary, RunResult,
};
pub use commands::{cmd_ablate, cmd_check, cmd_eval, cmd_gen, cmd_train, prepare_dataset, PreparedDataset};
pub use config::{AblationConfig, DataConfig, RunConfig, LANDMARK_NAMES};
pub use dataset::{
    build_vocab, default_lexicon, generate_graph, generate_split, instruction_for, write_dataset, Dataset,
    EpisodeRecord, GeneratedSplit, LoadedSplit, Manifest, Split,
};

use crate::agent::TrainError;
use crate::encoder::EncodeError;
use crate::env_graph::GraphError;
use crate::lang::LangError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Data(String),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Train(TrainError::Config(_)) => 2,
            _ => 1,
        }
    }
}
