use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::TrainError;
use crate::encoder::Vocab;
use crate::env_graph::{enumerate_alternatives, partition_trajectories, NavGraph, NodeId, Trajectory};
use crate::lang::{augment_positive, make_intra_negative, AugmentMethod, AugmenterConfig, InstructionDoc, Provenance};

/// One instruction-following episode on a graph of its split.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub id: u64,
    /// Index into the split's graph list.
    pub graph: usize,
    pub reference: Trajectory,
    pub instruction: InstructionDoc,
}

/// An episode with everything the contrastive terms need precomputed.
///
/// Token sequences are vocabulary ids. Trajectory positives and negatives come
/// from enumerating alternative simple paths and partitioning them by hop count.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedEpisode {
    pub id: u64,
    pub graph: usize,
    pub reference: Trajectory,
    pub tokens: Vec<usize>,
    pub spans: Vec<Vec<usize>>,
    pub instr_positives: Vec<Vec<usize>>,
    pub instr_negatives: Vec<Vec<usize>>,
    pub traj_positives: Vec<Trajectory>,
    pub traj_negatives: Vec<Trajectory>,
}

impl PreparedEpisode {
    pub fn start(&self) -> NodeId {
        self.reference.start()
    }

    pub fn goal(&self) -> NodeId {
        self.reference.end()
    }
}

/// Graphs plus prepared episodes.
#[derive(Clone, Debug, Default)]
pub struct PreparedSplit {
    pub graphs: Vec<NavGraph>,
    pub episodes: Vec<PreparedEpisode>,
}

impl PreparedSplit {
    pub fn graph_of(&self, ep: &PreparedEpisode) -> &NavGraph {
        &self.graphs[ep.graph]
    }
}

/// Counts of what preparation produced, for logging.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepareStats {
    pub episodes: usize,
    pub instr_positives: usize,
    pub dropped_copies: usize,
    pub traj_positives: usize,
    pub traj_negatives: usize,
    pub traj_discarded: usize,
}

/// splitmix64 finaliser, for deriving per-episode seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn prepare_episode(
    ep: &Episode,
    graph: &NavGraph,
    vocab: &Vocab,
    aug: &AugmenterConfig,
    cfg: &TrainConfig,
    seed: u64,
    stats: &mut PrepareStats,
) -> Result<PreparedEpisode, TrainError> {
    let ep_seed = mix_seed(seed, ep.id);
    let doc = &ep.instruction;

    let aug = aug.with_seed(ep_seed);
    let mut instr_positives = Vec::new();
    for method in AugmentMethod::ALL {
        let pos = augment_positive(doc, &aug, method)?;
        if pos.provenance() == Provenance::OriginalCopy {
            stats.dropped_copies += 1;
            continue;
        }
        instr_positives.push(vocab.ids(pos.tokens()));
    }
    let instr_negatives = (0..cfg.instr_negatives as u64)
        .map(|k| vocab.ids(make_intra_negative(doc, mix_seed(ep_seed, k + 1)).tokens()))
        .collect();

    let th = cfg.thresholds()?;
    let h_gt = ep.reference.hop();
    let alternatives = enumerate_alternatives(
        graph,
        ep.reference.start(),
        ep.reference.end(),
        th.default_hop_cap(h_gt),
        cfg.max_alternatives,
        ep_seed,
    )?;
    let part = partition_trajectories(&alternatives, h_gt, th.alpha_p(), th.alpha_n())?;

    stats.episodes += 1;
    stats.instr_positives += instr_positives.len();
    stats.traj_positives += part.positives.len();
    stats.traj_negatives += part.intra_negatives.len();
    stats.traj_discarded += part.discarded.len();
    Ok(PreparedEpisode {
        id: ep.id,
        graph: ep.graph,
        reference: ep.reference.clone(),
        tokens: vocab.ids(doc.tokens()),
        spans: doc.spans().map(|s| vocab.ids(s)).collect(),
        instr_positives,
        instr_negatives,
        traj_positives: part.positives,
        traj_negatives: part.intra_negatives,
    })
}

pub fn prepare_split(
    graphs: Vec<NavGraph>,
    episodes: &[Episode],
    vocab: &Vocab,
    aug: &AugmenterConfig,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(PreparedSplit, PrepareStats), TrainError> {
    let mut stats = PrepareStats::default();
    let prepared = episodes
        .iter()
        .map(|ep| {
            let g = graphs.get(ep.graph).ok_or(TrainError::MissingGraph(ep.graph))?;
            prepare_episode(ep, g, vocab, aug, cfg, seed, &mut stats)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((
        PreparedSplit {
            graphs,
            episodes: prepared,
        },
        stats,
    ))
}
