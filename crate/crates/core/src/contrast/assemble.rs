use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::encoder::TracedEmbedding;
use crate::scalar::Scalar;

use super::bank::MemoryBank;
use super::circle::{circle_loss_sims, MarginConfig};
use super::infonce::info_nce_sims;
use super::mining::{mine_pairs, MinedPairs};
use super::ContrastError;

/// Which contrastive objective is being assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastKind {
    /// Coarse loss over whole trajectories.
    Trajectory,
    /// Coarse loss over whole instructions.
    Instruction,
    /// Fine-grained loss over sub-instructions.
    SubInstruction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Objective {
    Circle,
    InfoNce { temperature: f64 },
}

/// Loss choice plus the memory-bank and pair-mining switches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContrastConfig<F> {
    pub margins: MarginConfig<F>,
    pub objective: Objective,
    pub use_bank: bool,
    pub use_mining: bool,
}

impl<F: Scalar> Default for ContrastConfig<F> {
    fn default() -> Self {
        Self {
            margins: MarginConfig::default(),
            objective: Objective::Circle,
            use_bank: true,
            use_mining: true,
        }
    }
}

/// Pair counts for one or more anchors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningStats {
    pub anchors: usize,
    pub skipped_anchors: usize,
    pub positives: usize,
    pub negatives: usize,
    pub bank_negatives: usize,
    pub bank_self_excluded: usize,
    pub kept_positives: usize,
    pub kept_negatives: usize,
    pub false_negatives: usize,
    pub easy_negatives: usize,
}

impl std::ops::AddAssign for MiningStats {
    fn add_assign(&mut self, o: Self) {
        self.anchors += o.anchors;
        self.skipped_anchors += o.skipped_anchors;
        self.positives += o.positives;
        self.negatives += o.negatives;
        self.bank_negatives += o.bank_negatives;
        self.bank_self_excluded += o.bank_self_excluded;
        self.kept_positives += o.kept_positives;
        self.kept_negatives += o.kept_negatives;
        self.false_negatives += o.false_negatives;
        self.easy_negatives += o.easy_negatives;
    }
}

#[derive(Clone, Debug)]
pub struct AssembledLoss {
    pub kind: ContrastKind,
    pub loss: Var,
    pub stats: MiningStats,
    pub mined: Option<MinedPairs>,
}

/// Builds one anchor's contrastive loss.
///
/// Negatives are the intra-negatives plus a snapshot of the bank (minus entries
/// sharing the anchor's `source_id`); the selected pairs go through the
/// configured objective. After the loss is formed the raw positives are pushed
/// into the bank, detached. With no positives the loss is zero and the bank is
/// left untouched.
pub fn assemble_loss<F: Scalar>(
    tape: &Tape<F>,
    kind: ContrastKind,
    q: &TracedEmbedding,
    positives: &[TracedEmbedding],
    intra_negatives: &[TracedEmbedding],
    bank: &mut MemoryBank<F>,
    cfg: &ContrastConfig<F>,
) -> Result<AssembledLoss, ContrastError> {
    let out = assemble_loss_frozen(tape, kind, q, positives, intra_negatives, bank, cfg)?;
    if cfg.use_bank && !positives.is_empty() {
        let records: Vec<_> = positives.iter().map(|p| p.record(tape)).collect();
        bank.push(&records);
    }
    Ok(out)
}

/// As [`assemble_loss`] but leaves the bank untouched; the caller decides
/// when the positives are pushed.
pub fn assemble_loss_frozen<F: Scalar>(
    tape: &Tape<F>,
    kind: ContrastKind,
    q: &TracedEmbedding,
    positives: &[TracedEmbedding],
    intra_negatives: &[TracedEmbedding],
    bank: &MemoryBank<F>,
    cfg: &ContrastConfig<F>,
) -> Result<AssembledLoss, ContrastError> {
    let mut stats = MiningStats {
        anchors: 1,
        positives: positives.len(),
        ..MiningStats::default()
    };
    if positives.is_empty() {
        stats.skipped_anchors = 1;
        return Ok(AssembledLoss {
            kind,
            loss: tape.constant(F::zero()),
            stats,
            mined: None,
        });
    }

    let mut negatives: Vec<Vec<Var>> = intra_negatives.iter().map(|n| n.vec.clone()).collect();
    if cfg.use_bank {
        for rec in bank.entries() {
            if rec.source_id == q.source_id {
                stats.bank_self_excluded += 1;
            } else {
                negatives.push(tape.constants(&rec.vec));
                stats.bank_negatives += 1;
            }
        }
    }
    stats.negatives = negatives.len();

    let pos_sims: Vec<Var> = positives.iter().map(|p| tape.dot(&q.vec, &p.vec)).collect();
    let neg_sims: Vec<Var> = negatives.iter().map(|n| tape.dot(&q.vec, n)).collect();

    let (sp, sn, mined) = if cfg.use_mining {
        let mined = mine_pairs(&tape.values(&pos_sims), &tape.values(&neg_sims), cfg.margins.m());
        stats.kept_positives = mined.kept_positives.len();
        stats.kept_negatives = mined.kept_negatives.len();
        stats.false_negatives = mined.discarded_false_negatives.len();
        stats.easy_negatives = mined.discarded_easy.len();
        stats.skipped_anchors = usize::from(mined.skipped());
        let sp = mined.kept_positives.iter().map(|&i| pos_sims[i]).collect::<Vec<_>>();
        let sn = mined.kept_negatives.iter().map(|&j| neg_sims[j]).collect::<Vec<_>>();
        (sp, sn, Some(mined))
    } else {
        stats.kept_positives = pos_sims.len();
        stats.kept_negatives = neg_sims.len();
        stats.skipped_anchors = usize::from(neg_sims.is_empty());
        (pos_sims, neg_sims, None)
    };

    let loss = match cfg.objective {
        Objective::Circle => circle_loss_sims(tape, &sp, &sn, &cfg.margins)?,
        Objective::InfoNce { temperature } => info_nce_sims(tape, &sp, &sn, F::of(temperature))?,
    };

    Ok(AssembledLoss {
        kind,
        loss,
        stats,
        mined,
    })
}
