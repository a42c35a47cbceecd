//! Instructions: sub-instruction splitting, positive augmentation, intra-negative
//! generation and neighbour sets for the fine-grained loss.

mod augment;
mod client;
mod doc;

pub use augment::{augment_positive, AugmentMethod, AugmenterConfig, Lexicon};
pub use client::{ClientError, EditRequest, EditResponse, InsertionStubClient, TableRewriteClient, TextEditClient};
pub use doc::{
    is_nav_keyword, make_intra_negative, split_sub_instructions, sub_instruction_sets, tokenize, InstructionDoc,
    Provenance, SubInstructionSets, NAV_KEYWORDS,
};

#[derive(Debug, thiserror::Error)]
pub enum LangError {
    #[error("empty token sequence")]
    Empty,
    #[error("invalid sub-instruction spans: {0}")]
    BadSpans(String),
    #[error("query span {query_idx} out of range for {spans} spans")]
    QueryOutOfRange { query_idx: usize, spans: usize },
    #[error("neighbour sets need at least two sub-instructions")]
    TooFewSpans,
    #[error("only original instructions can be augmented (got {0:?})")]
    NotOriginal(Provenance),
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
