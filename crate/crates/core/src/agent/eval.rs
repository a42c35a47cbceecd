use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::Tape;
use crate::encoder::EncoderParams;
use crate::env_graph::{evaluate_episode, MetricReport};
use crate::scalar::Scalar;

use super::episode::PreparedSplit;
use super::rollout::{rollout, RolloutMode, RolloutTask};
use super::TrainError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalPolicy {
    Greedy,
    /// Shortest-path oracle; a sanity bound for the metrics.
    Teacher,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub mean: MetricReport,
    pub episodes: Vec<MetricReport>,
}

/// Rolls out every episode of the split and scores it against its reference.
pub fn evaluate<F: Scalar>(
    params: &EncoderParams<F>,
    split: &PreparedSplit,
    max_steps: usize,
    success_radius_m: f64,
    policy: EvalPolicy,
) -> Result<EvalReport, TrainError> {
    let mode = match policy {
        EvalPolicy::Greedy => RolloutMode::Greedy,
        EvalPolicy::Teacher => RolloutMode::TeacherForced,
    };
    let episodes = split
        .episodes
        .par_iter()
        .map(|ep| {
            let graph = split.graph_of(ep);
            let tape = Tape::new();
            let pv = params.load_frozen(&tape);
            let task = RolloutTask {
                graph,
                tokens: &ep.tokens,
                start: ep.start(),
                goal: ep.goal(),
                max_steps,
                success_radius_m,
            };
            // Greedy and teacher rollouts draw no randomness.
            let trace = rollout(&tape, &pv, &task, mode, &mut ChaCha8Rng::seed_from_u64(0))?;
            Ok(evaluate_episode(graph, &trace.trajectory(graph), &ep.reference, success_radius_m))
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    Ok(EvalReport {
        mean: MetricReport::mean(&episodes),
        episodes,
    })
}
