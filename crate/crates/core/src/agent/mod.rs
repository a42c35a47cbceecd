//! Navigation agent training: rollouts, imitation and actor-critic losses, the
//! composite objective with contrastive terms, SGD steps and evaluation.

mod config;
mod episode;
mod eval;
mod losses;
mod rollout;
mod train;

pub use config::TrainConfig;
pub use episode::{mix_seed, prepare_episode, prepare_split, Episode, PrepareStats, PreparedEpisode, PreparedSplit};
pub use eval::{evaluate, EvalPolicy, EvalReport};
pub use losses::{a2c_loss, a2c_surrogate, advantages, discounted_returns, il_loss, A2cTerms};
pub use rollout::{
    argmax, rollout, sample, teacher_action, Action, EpisodeTrace, RolloutMode, RolloutTask, StepRecord, STOP_REWARD,
};
pub use train::{
    clip_gradient, composite_loss, train_step, train_step_il_rl, Banks, CompositeLoss, LossBreakdown, TrainObjective,
    Trainer, TrainRngs,
};

use crate::contrast::ContrastError;
use crate::encoder::EncodeError;
use crate::env_graph::GraphError;
use crate::lang::LangError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("episode refers to missing graph {0}")]
    MissingGraph(usize),
    #[error("non-finite loss or gradient")]
    NonFinite,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Contrast(#[from] ContrastError),
}
