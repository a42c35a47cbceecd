use serde::{Deserialize, Serialize};

use super::params::{Block, EncoderParams, ParamVars, Vocab, DIRECTIONS};
use super::EncodeError;
use crate::autodiff::{Tape, Var};
use crate::env_graph::{NavGraph, NodeId, Trajectory};
use crate::lang::InstructionDoc;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    /// Anchor `q`: projection followed by the predictor.
    Anchor,
    Positive,
    Negative,
}

/// Unit-norm representation with its role and originating sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRecord<F> {
    pub vec: Vec<F>,
    pub role: Role,
    pub source_id: u64,
    pub detached: bool,
}

impl<F: Scalar> EmbeddingRecord<F> {
    pub fn norm(&self) -> F {
        self.vec.iter().map(|&x| x * x).sum::<F>().sqrt()
    }

    /// Copy with no gradient linkage.
    pub fn detach(&self) -> Self {
        Self {
            detached: true,
            ..self.clone()
        }
    }
}

/// Embedding still attached to a tape.
#[derive(Clone, Debug)]
pub struct TracedEmbedding {
    pub vec: Vec<Var>,
    pub role: Role,
    pub source_id: u64,
}

impl TracedEmbedding {
    pub fn record<F: Scalar>(&self, tape: &Tape<F>) -> EmbeddingRecord<F> {
        EmbeddingRecord {
            vec: tape.values(&self.vec),
            role: self.role,
            source_id: self.source_id,
            detached: false,
        }
    }

    /// Puts a stored record on the tape as constants.
    pub fn constant<F: Scalar>(tape: &Tape<F>, rec: &EmbeddingRecord<F>) -> Self {
        Self {
            vec: tape.constants(&rec.vec),
            role: rec.role,
            source_id: rec.source_id,
        }
    }
}

/// `U`: two affine layers with a tanh between; anchors additionally pass the
/// predictor `G`. The result is L2-normalised.
pub fn project<F: Scalar>(tape: &Tape<F>, pv: &ParamVars, x: &[Var], role: Role) -> Vec<Var> {
    let h = tape.vtanh(&tape.affine(pv.block(Block::ProjW1), pv.block(Block::ProjB1), x));
    let mut u = tape.affine(pv.block(Block::ProjW2), pv.block(Block::ProjB2), &h);
    if role == Role::Anchor {
        u = tape.affine(pv.block(Block::PredW), pv.block(Block::PredB), &u);
    }
    tape.normalize(&u)
}

/// Mean of token embeddings, projected.
pub fn embed_tokens<F: Scalar>(
    tape: &Tape<F>,
    pv: &ParamVars,
    token_ids: &[usize],
    role: Role,
) -> Result<Vec<Var>, EncodeError> {
    if token_ids.is_empty() {
        return Err(EncodeError::EmptyInput);
    }
    let vocab = pv.dims().vocab;
    let rows: Vec<&[Var]> = token_ids.iter().map(|&id| pv.token(id.min(vocab - 1))).collect();
    let pooled = tape.mean_vectors(&rows);
    Ok(project(tape, pv, &pooled, role))
}

/// Movement direction between two positions: `+x, -x, +y, -y, +z, -z` when the
/// displacement lies on one axis, otherwise slot 6.
pub fn direction(from: &[f64; 3], to: &[f64; 3]) -> usize {
    const AXIS_EPS: f64 = 1e-9;
    let delta = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let nonzero: Vec<usize> = (0..3).filter(|&i| delta[i].abs() > AXIS_EPS).collect();
    match nonzero.as_slice() {
        [axis] => 2 * axis + usize::from(delta[*axis] < 0.0),
        _ => DIRECTIONS - 1,
    }
}

/// Sparse per-step feature: landmark one-hot, optional direction one-hot and a
/// scalar progress value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepFeature {
    pub landmark: usize,
    pub direction: Option<usize>,
    pub progress: f64,
}

impl StepFeature {
    /// Feature for arriving at `to` (from `from`, if moving).
    pub fn at(graph: &NavGraph, from: Option<NodeId>, to: NodeId, progress: f64) -> Self {
        Self {
            landmark: graph.node(to).landmark,
            direction: from.map(|f| direction(&graph.node(f).pos, &graph.node(to).pos)),
            progress,
        }
    }
}

/// `feature · step_table`.
pub fn step_vector<F: Scalar>(tape: &Tape<F>, pv: &ParamVars, f: &StepFeature) -> Result<Vec<Var>, EncodeError> {
    let dims = pv.dims();
    if f.landmark >= dims.n_landmarks {
        return Err(EncodeError::LandmarkOutOfRange(f.landmark));
    }
    let mut rows = vec![pv.step_row(f.landmark)];
    let mut coeffs = vec![F::one()];
    if let Some(dir) = f.direction {
        rows.push(pv.step_row(dims.n_landmarks + dir));
        coeffs.push(F::one());
    }
    rows.push(pv.step_row(dims.n_landmarks + DIRECTIONS));
    coeffs.push(F::of(f.progress));
    Ok(tape.combine_vectors(&rows, &coeffs))
}

/// Mean of per-step feature projections along the trajectory, projected.
pub fn embed_trajectory<F: Scalar>(
    tape: &Tape<F>,
    pv: &ParamVars,
    graph: &NavGraph,
    traj: &Trajectory,
    role: Role,
) -> Result<Vec<Var>, EncodeError> {
    let nodes = traj.nodes();
    let denom = traj.hop().max(1) as f64;
    let steps = nodes
        .iter()
        .enumerate()
        .map(|(t, &n)| {
            let from = t.checked_sub(1).map(|p| nodes[p]);
            step_vector(tape, pv, &StepFeature::at(graph, from, n, t as f64 / denom))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&[Var]> = steps.iter().map(Vec::as_slice).collect();
    let pooled = tape.mean_vectors(&refs);
    Ok(project(tape, pv, &pooled, role))
}

/// Output of one attention + policy step.
#[derive(Clone, Debug)]
pub struct AgentStep {
    pub logits: Vec<Var>,
    pub state: Vec<Var>,
    pub value: Var,
}

/// Scaled dot-product attention of `prev_state + obs` over the instruction's
/// token embeddings, a tanh state update, dot-product policy logits against the
/// candidates and a linear value head.
pub fn attend_and_act<F: Scalar>(
    tape: &Tape<F>,
    pv: &ParamVars,
    tokens: &[&[Var]],
    obs: &[Var],
    prev_state: &[Var],
    candidates: &[Vec<Var>],
) -> Result<AgentStep, EncodeError> {
    if candidates.is_empty() {
        return Err(EncodeError::NoCandidates);
    }
    if tokens.is_empty() {
        return Err(EncodeError::EmptyInput);
    }
    let d = obs.len();
    let query = tape.vadd(prev_state, obs);
    let scale = F::one() / F::of(d as f64).sqrt();
    let scores: Vec<Var> = tokens.iter().map(|x| tape.scale(tape.dot(x, &query), scale)).collect();
    let attn = tape.softmax(&scores);
    let ctx = tape.weighted_vectors(tokens, &attn);
    let pre = tape.vadd(
        &tape.vadd(
            &tape.matvec(pv.block(Block::AttnCtx), d, &ctx),
            &tape.matvec(pv.block(Block::AttnObs), d, obs),
        ),
        &tape.affine(pv.block(Block::AttnPrev), pv.block(Block::StateBias), prev_state),
    );
    let state = tape.vtanh(&pre);
    let logits = candidates.iter().map(|c| tape.dot(&state, c)).collect();
    let value = tape.add(tape.dot(pv.block(Block::ValueW), &state), pv.block(Block::ValueB)[0]);
    Ok(AgentStep { logits, state, value })
}

pub fn encode_instruction<F: Scalar>(
    doc: &InstructionDoc,
    vocab: &Vocab,
    params: &EncoderParams<F>,
    role: Role,
    source_id: u64,
) -> Result<EmbeddingRecord<F>, EncodeError> {
    let tape = Tape::new();
    let pv = params.load_frozen(&tape);
    let vec = embed_tokens(&tape, &pv, &vocab.ids(doc.tokens()), role)?;
    Ok(EmbeddingRecord {
        vec: tape.values(&vec),
        role,
        source_id,
        detached: false,
    })
}

pub fn encode_trajectory<F: Scalar>(
    traj: &Trajectory,
    graph: &NavGraph,
    params: &EncoderParams<F>,
    role: Role,
    source_id: u64,
) -> Result<EmbeddingRecord<F>, EncodeError> {
    let tape = Tape::new();
    let pv = params.load_frozen(&tape);
    let vec = embed_trajectory(&tape, &pv, graph, traj, role)?;
    Ok(EmbeddingRecord {
        vec: tape.values(&vec),
        role,
        source_id,
        detached: false,
    })
}

/// Value and analytic gradient of a scalar loss built on the tape.
pub fn gradient<F, L>(params: &EncoderParams<F>, loss: L) -> Result<(F, Vec<F>), EncodeError>
where
    F: Scalar,
    L: FnOnce(&Tape<F>, &ParamVars) -> Result<Var, EncodeError>,
{
    let tape = Tape::new();
    let pv = params.load(&tape);
    let out = loss(&tape, &pv)?;
    let value = tape.value(out);
    if !value.is_finite() {
        return Err(EncodeError::NonFinite);
    }
    let grads = tape.gradient(out).wrt_all(pv.all());
    Ok((value, grads))
}
