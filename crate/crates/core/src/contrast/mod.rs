//! Contrastive machinery: circle loss with self-paced logits, the multi-positive
//! InfoNCE baseline, pair mining, memory banks, and per-anchor loss assembly.

mod assemble;
mod bank;
mod circle;
mod infonce;
mod mining;

pub use assemble::{assemble_loss, assemble_loss_frozen, AssembledLoss, ContrastConfig, ContrastKind, MiningStats, Objective};
pub use bank::{MemoryBank, DEFAULT_BANK_CAPACITY};
pub use circle::{
    circle_loss, circle_loss_sims, circle_loss_value, cosine_sim, negative_logit, positive_logit, similarities,
    MarginConfig,
};
pub use infonce::{info_nce_multi, info_nce_sims};
pub use mining::{mine_pairs, pair_mining, MinedPairs};

#[derive(Debug, thiserror::Error)]
pub enum ContrastError {
    #[error("invalid contrastive configuration: {0}")]
    Config(String),
    #[error("non-finite similarity")]
    NonFinite,
}
