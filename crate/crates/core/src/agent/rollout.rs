use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::encoder::{attend_and_act, step_vector, Block, EncodeError, ParamVars, StepFeature};
use crate::env_graph::{shortest_path, NavGraph, NodeId, Trajectory};
use crate::scalar::Scalar;

use super::TrainError;

/// Reward for stopping inside (or penalty for stopping outside) the success radius.
pub const STOP_REWARD: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Move(NodeId),
    Stop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RolloutMode {
    /// Always takes the shortest-path action.
    TeacherForced,
    /// Samples from the policy.
    Sampled,
    /// Takes the arg-max action.
    Greedy,
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub node: NodeId,
    /// Sorted neighbours followed by [`Action::Stop`].
    pub candidates: Vec<Action>,
    pub logits: Vec<Var>,
    pub value: Var,
    pub action: usize,
    pub teacher: usize,
    pub reward: f64,
}

#[derive(Clone, Debug)]
pub struct EpisodeTrace {
    pub steps: Vec<StepRecord>,
    pub path: Vec<NodeId>,
    pub stopped: bool,
}

impl EpisodeTrace {
    pub fn trajectory(&self, graph: &NavGraph) -> Trajectory {
        Trajectory::new(graph, self.path.clone()).expect("rollouts only follow edges")
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }
}

/// What a rollout needs to know about its episode.
#[derive(Clone, Copy, Debug)]
pub struct RolloutTask<'a> {
    pub graph: &'a NavGraph,
    pub tokens: &'a [usize],
    pub start: NodeId,
    pub goal: NodeId,
    pub max_steps: usize,
    pub success_radius_m: f64,
}

/// Shortest-path action: next node toward the goal, or stop on arrival.
pub fn teacher_action(graph: &NavGraph, node: NodeId, goal: NodeId) -> Result<Action, TrainError> {
    if node == goal {
        return Ok(Action::Stop);
    }
    let path = shortest_path(graph, node, goal)?;
    Ok(Action::Move(path.nodes()[1]))
}

fn progress(t: usize, max_steps: usize) -> f64 {
    t as f64 / max_steps as f64
}

/// Runs the policy on `tape` until it stops or `max_steps` actions are taken.
pub fn rollout<F: Scalar, R: Rng>(
    tape: &Tape<F>,
    pv: &ParamVars,
    task: &RolloutTask<'_>,
    mode: RolloutMode,
    rng: &mut R,
) -> Result<EpisodeTrace, TrainError> {
    let graph = task.graph;
    if task.tokens.is_empty() {
        return Err(EncodeError::EmptyInput.into());
    }
    // Token embedding plus position, so the attention can follow clause order.
    let tokens: Vec<Vec<Var>> = task
        .tokens
        .iter()
        .enumerate()
        .map(|(i, &id)| tape.vadd(pv.token(id), pv.position(i)))
        .collect();
    let tokens: Vec<&[Var]> = tokens.iter().map(Vec::as_slice).collect();
    let stop_vec = pv.block(Block::Stop).to_vec();
    let d = pv.dims().d;
    let mut state: Vec<Var> = tape.constants(&vec![F::zero(); d]);

    let mut path = vec![task.start];
    let mut steps = Vec::new();
    let mut prev: Option<NodeId> = None;
    let mut node = task.start;
    let mut stopped = false;

    for t in 0..task.max_steps {
        let obs = step_vector(tape, pv, &StepFeature::at(graph, prev, node, progress(t, task.max_steps)))?;
        let mut candidates: Vec<Action> = graph.neighbors(node).iter().map(|&(u, _)| Action::Move(u)).collect();
        candidates.push(Action::Stop);
        let cand_vecs = candidates
            .iter()
            .map(|a| match *a {
                Action::Move(u) => {
                    step_vector(tape, pv, &StepFeature::at(graph, Some(node), u, progress(t + 1, task.max_steps)))
                }
                Action::Stop => Ok(stop_vec.clone()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let out = attend_and_act(tape, pv, &tokens, &obs, &state, &cand_vecs)?;

        let teacher_act = teacher_action(graph, node, task.goal)?;
        let teacher = candidates.iter().position(|a| *a == teacher_act).expect("teacher action is a candidate");
        let action = match mode {
            RolloutMode::TeacherForced => teacher,
            RolloutMode::Greedy => argmax(&tape.values(&out.logits)),
            RolloutMode::Sampled => sample(&tape.values(&out.logits), rng),
        };
        let here = graph.geodesic(node, task.goal);
        let reward = match candidates[action] {
            Action::Move(u) => here - graph.geodesic(u, task.goal),
            Action::Stop if here <= task.success_radius_m => STOP_REWARD,
            Action::Stop => -STOP_REWARD,
        };
        steps.push(StepRecord {
            node,
            candidates: candidates.clone(),
            logits: out.logits,
            value: out.value,
            action,
            teacher,
            reward,
        });
        match candidates[action] {
            Action::Stop => {
                stopped = true;
                break;
            }
            Action::Move(u) => {
                prev = Some(node);
                node = u;
                path.push(u);
            }
        }
        state = out.state;
    }
    Ok(EpisodeTrace { steps, path, stopped })
}

/// First index of the maximum.
pub fn argmax<F: Scalar>(xs: &[F]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Draws an index from `softmax(logits)` with one uniform variate.
pub fn sample<F: Scalar, R: Rng>(logits: &[F], rng: &mut R) -> usize {
    let vals: Vec<f64> = logits.iter().map(|l| l.as_f64()).collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = vals.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        if u < *wi {
            return i;
        }
        u -= wi;
    }
    w.len() - 1
}
