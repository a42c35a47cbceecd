use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::contrast::{assemble_loss_frozen, ContrastConfig, ContrastKind, MemoryBank, MiningStats};
use crate::encoder::{embed_tokens, embed_trajectory, Dims, EncoderParams, ParamVars, Role, TracedEmbedding};
use crate::env_graph::Trajectory;
use crate::scalar::Scalar;

use super::config::TrainConfig;
use super::episode::{mix_seed, PreparedEpisode, PreparedSplit};
use super::losses::{a2c_surrogate, advantages, discounted_returns, il_loss};
use super::rollout::{rollout, RolloutMode, RolloutTask};
use super::TrainError;

/// The three memory banks: trajectories, instructions, sub-instructions.
#[derive(Clone, Debug, PartialEq)]
pub struct Banks<F> {
    pub trajectory: MemoryBank<F>,
    pub instruction: MemoryBank<F>,
    pub sub_instruction: MemoryBank<F>,
}

impl<F: Scalar> Banks<F> {
    pub fn new(capacity: usize) -> Self {
        Self {
            trajectory: MemoryBank::new(capacity),
            instruction: MemoryBank::new(capacity),
            sub_instruction: MemoryBank::new(capacity),
        }
    }
}

/// Independent random streams so that enabling one loss term does not shift
/// the draws of another.
#[derive(Clone, Debug)]
pub struct TrainRngs {
    pub rollout: ChaCha8Rng,
    pub contrast: ChaCha8Rng,
    pub batch: ChaCha8Rng,
}

impl TrainRngs {
    pub fn new(seed: u64) -> Self {
        Self {
            rollout: ChaCha8Rng::seed_from_u64(mix_seed(seed, 2)),
            contrast: ChaCha8Rng::seed_from_u64(mix_seed(seed, 3)),
            batch: ChaCha8Rng::seed_from_u64(mix_seed(seed, 4)),
        }
    }
}

/// Per-step loss values.
///
/// `ct`, `ci` and `fi` are the weighted contributions, so
/// `il + rl + ct + ci + fi == total`; the `raw_*` fields are the unweighted
/// batch means.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub il: f64,
    pub rl: f64,
    pub ct: f64,
    pub ci: f64,
    pub fi: f64,
    pub total: f64,
    pub raw_ct: f64,
    pub raw_ci: f64,
    pub raw_fi: f64,
    pub grad_norm: f64,
    pub mining_ct: MiningStats,
    pub mining_ci: MiningStats,
    pub mining_fi: MiningStats,
}

impl LossBreakdown {
    pub fn term_sum(&self) -> f64 {
        self.il + self.rl + self.ct + self.ci + self.fi
    }
}

/// The composite objective as tape nodes.
#[derive(Clone, Debug)]
pub struct CompositeLoss {
    pub total: Var,
    pub il: Var,
    pub rl: Var,
    /// Weighted terms, absent when their weight is zero.
    pub ct: Option<(Var, Var)>,
    pub ci: Option<(Var, Var)>,
    pub fi: Option<(Var, Var)>,
    pub mining: [MiningStats; 3],
    /// Per-episode advantages of the sampled rollouts.
    pub advantages: Vec<Vec<f64>>,
}

impl CompositeLoss {
    pub fn breakdown<F: Scalar>(&self, tape: &Tape<F>) -> LossBreakdown {
        let v = |x: Var| tape.value(x).as_f64();
        let pair = |p: Option<(Var, Var)>| p.map_or((0.0, 0.0), |(raw, w)| (v(raw), v(w)));
        let (raw_ct, ct) = pair(self.ct);
        let (raw_ci, ci) = pair(self.ci);
        let (raw_fi, fi) = pair(self.fi);
        LossBreakdown {
            il: v(self.il),
            rl: v(self.rl),
            ct,
            ci,
            fi,
            total: v(self.total),
            raw_ct,
            raw_ci,
            raw_fi,
            grad_norm: 0.0,
            mining_ct: self.mining[0],
            mining_ci: self.mining[1],
            mining_fi: self.mining[2],
        }
    }
}

fn task<'a>(split: &'a PreparedSplit, ep: &'a PreparedEpisode, cfg: &TrainConfig) -> RolloutTask<'a> {
    RolloutTask {
        graph: split.graph_of(ep),
        tokens: &ep.tokens,
        start: ep.start(),
        goal: ep.goal(),
        max_steps: cfg.max_steps,
        success_radius_m: cfg.success_radius_m,
    }
}

/// Imitation and actor-critic terms averaged over the batch, plus the
/// advantages used. `frozen` replaces the live advantages when given.
fn il_rl_terms<F: Scalar>(
    tape: &Tape<F>,
    pv: &ParamVars,
    split: &PreparedSplit,
    batch: &[usize],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    frozen: Option<&[Vec<f64>]>,
) -> Result<(Var, Var, Vec<Vec<f64>>), TrainError> {
    let mut il = Vec::with_capacity(batch.len());
    let mut rl = Vec::with_capacity(batch.len());
    let mut used = Vec::with_capacity(batch.len());
    for (k, &i) in batch.iter().enumerate() {
        let ep = &split.episodes[i];
        let t = task(split, ep, cfg);
        let forced = rollout(tape, pv, &t, RolloutMode::TeacherForced, rng)?;
        il.push(il_loss(tape, &forced));
        let sampled = rollout(tape, pv, &t, RolloutMode::Sampled, rng)?;
        let returns = discounted_returns(&sampled.rewards(), cfg.rl_discount);
        let adv = match frozen {
            Some(f) => f[k].clone(),
            None => advantages(tape, &sampled, &returns),
        };
        rl.push(a2c_surrogate(tape, &sampled, &returns, &adv, cfg.value_coef).total);
        used.push(adv);
    }
    Ok((tape.mean(&il), tape.mean(&rl), used))
}

fn pick<T: Clone, R: Rng>(items: &[T], k: usize, rng: &mut R) -> Vec<T> {
    if items.len() <= k {
        return items.to_vec();
    }
    let mut idx = index::sample(rng, items.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i].clone()).collect()
}

fn traced_tokens<F: Scalar>(
    tape: &Tape<F>,
    pv: &ParamVars,
    ids: &[usize],
    role: Role,
    source_id: u64,
) -> Result<TracedEmbedding, TrainError> {
    Ok(TracedEmbedding {
        vec: embed_tokens(tape, pv, ids, role)?,
        role,
        source_id,
    })
}

fn traced_traj<F: Scalar>(
    tape: &Tape<F>,
    pv: &ParamVars,
    split: &PreparedSplit,
    ep: &PreparedEpisode,
    traj: &Trajectory,
    role: Role,
) -> Result<TracedEmbedding, TrainError> {
    Ok(TracedEmbedding {
        vec: embed_trajectory(tape, pv, split.graph_of(ep), traj, role)?,
        role,
        source_id: ep.id,
    })
}

/// Per-anchor contrastive losses for one kind, summed then divided by the batch size.
#[allow(clippy::too_many_arguments)]
fn contrast_term<F: Scalar>(
    tape: &Tape<F>,
    pv: &ParamVars,
    split: &PreparedSplit,
    batch: &[usize],
    kind: ContrastKind,
    bank: &mut MemoryBank<F>,
    ccfg: &ContrastConfig<F>,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Var, MiningStats), TrainError> {
    let mut losses = Vec::with_capacity(batch.len());
    let mut stats = MiningStats::default();
    // Every anchor reads the bank as it stood before the batch.
    let mut pending = Vec::new();
    for &i in batch {
        let ep = &split.episodes[i];
        let (q, pos, neg) = match kind {
            ContrastKind::Trajectory => {
                let q = traced_traj(tape, pv, split, ep, &ep.reference, Role::Anchor)?;
                let pos = pick(&ep.traj_positives, cfg.traj_positives, rng)
                    .iter()
                    .map(|t| traced_traj(tape, pv, split, ep, t, Role::Positive))
                    .collect::<Result<Vec<_>, _>>()?;
                let neg = pick(&ep.traj_negatives, cfg.traj_negatives, rng)
                    .iter()
                    .map(|t| traced_traj(tape, pv, split, ep, t, Role::Negative))
                    .collect::<Result<Vec<_>, _>>()?;
                (q, pos, neg)
            }
            ContrastKind::Instruction => {
                let q = traced_tokens(tape, pv, &ep.tokens, Role::Anchor, ep.id)?;
                let pos = ep
                    .instr_positives
                    .iter()
                    .map(|ids| traced_tokens(tape, pv, ids, Role::Positive, ep.id))
                    .collect::<Result<Vec<_>, _>>()?;
                let neg = ep
                    .instr_negatives
                    .iter()
                    .map(|ids| traced_tokens(tape, pv, ids, Role::Negative, ep.id))
                    .collect::<Result<Vec<_>, _>>()?;
                (q, pos, neg)
            }
            ContrastKind::SubInstruction => {
                let k = ep.spans.len();
                if k < 2 {
                    // A lone span has no neighbour to act as a positive.
                    stats.anchors += 1;
                    stats.skipped_anchors += 1;
                    continue;
                }
                let qi = rng.gen_range(0..k);
                let q = traced_tokens(tape, pv, &ep.spans[qi], Role::Anchor, ep.id)?;
                let mut pos = Vec::new();
                let mut neg = Vec::new();
                for (j, span) in ep.spans.iter().enumerate() {
                    if j == qi {
                        continue;
                    }
                    if j + 1 == qi || j == qi + 1 {
                        pos.push(traced_tokens(tape, pv, span, Role::Positive, ep.id)?);
                    } else {
                        neg.push(traced_tokens(tape, pv, span, Role::Negative, ep.id)?);
                    }
                }
                (q, pos, neg)
            }
        };
        let out = assemble_loss_frozen(tape, kind, &q, &pos, &neg, bank, ccfg)?;
        if ccfg.use_bank {
            pending.extend(pos.iter().map(|p| p.record(tape)));
        }
        stats += out.stats;
        losses.push(out.loss);
    }
    bank.push(&pending);
    let total = tape.sum(&losses);
    Ok((tape.scale(total, F::one() / F::of(batch.len() as f64)), stats))
}

/// Builds `IL + RL + λ1·L_CT + λ2·L_CI + λ3·L_FI` for a batch of episode indices.
///
/// Terms with zero weight are not built and draw nothing from the contrast
/// stream. Each bank is read as it stood before the batch and
/// receives the batch's positives afterwards. `frozen_advantages`
/// (one vector per batch entry) pins the actor-critic advantages, for gradient
/// checking.
#[allow(clippy::too_many_arguments)]
pub fn composite_loss<F: Scalar>(
    tape: &Tape<F>,
    pv: &ParamVars,
    split: &PreparedSplit,
    batch: &[usize],
    banks: &mut Banks<F>,
    cfg: &TrainConfig,
    ccfg: &ContrastConfig<F>,
    rngs: &mut TrainRngs,
    frozen_advantages: Option<&[Vec<f64>]>,
) -> Result<CompositeLoss, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let (il, rl, advantages) = il_rl_terms(tape, pv, split, batch, cfg, &mut rngs.rollout, frozen_advantages)?;
    let mut terms = vec![il, rl];
    let mut mining = [MiningStats::default(); 3];
    let (l1, l2, l3) = cfg.lambdas();
    let mut weighted = [None; 3];
    let kinds = [
        (ContrastKind::Trajectory, l1, &mut banks.trajectory),
        (ContrastKind::Instruction, l2, &mut banks.instruction),
        (ContrastKind::SubInstruction, l3, &mut banks.sub_instruction),
    ];
    for (slot, (kind, lambda, bank)) in kinds.into_iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        let (raw, stats) = contrast_term(tape, pv, split, batch, kind, bank, ccfg, cfg, &mut rngs.contrast)?;
        let w = tape.scale(raw, F::of(lambda));
        terms.push(w);
        mining[slot] = stats;
        weighted[slot] = Some((raw, w));
    }
    Ok(CompositeLoss {
        total: tape.sum(&terms),
        il,
        rl,
        ct: weighted[0],
        ci: weighted[1],
        fi: weighted[2],
        mining,
        advantages,
    })
}

/// Rescales `g` in place to L2 norm at most `max_norm`; returns the original norm.
pub fn clip_gradient<F: Scalar>(g: &mut [F], max_norm: f64) -> f64 {
    let norm = g.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = F::of(max_norm / norm);
        g.iter_mut().for_each(|x| *x *= s);
    }
    norm
}

fn apply_sgd<F: Scalar>(params: &mut EncoderParams<F>, grads: &mut [F], cfg: &TrainConfig) -> f64 {
    let norm = clip_gradient(grads, cfg.grad_clip);
    let lr = F::of(cfg.learning_rate);
    for (p, g) in params.as_mut_slice().iter_mut().zip(grads.iter()) {
        *p -= lr * *g;
    }
    norm
}

/// One SGD step on the composite objective.
///
/// On a non-finite loss or gradient, nothing (parameters, banks) is changed.
pub fn train_step<F: Scalar>(
    split: &PreparedSplit,
    batch: &[usize],
    params: &mut EncoderParams<F>,
    banks: &mut Banks<F>,
    cfg: &TrainConfig,
    rngs: &mut TrainRngs,
) -> Result<LossBreakdown, TrainError> {
    train_step_on(&Tape::new(), split, batch, params, banks, cfg, rngs)
}

fn train_step_on<F: Scalar>(
    tape: &Tape<F>,
    split: &PreparedSplit,
    batch: &[usize],
    params: &mut EncoderParams<F>,
    banks: &mut Banks<F>,
    cfg: &TrainConfig,
    rngs: &mut TrainRngs,
) -> Result<LossBreakdown, TrainError> {
    let ccfg = cfg.contrast::<F>()?;
    let pv = params.load(tape);
    let mut staged = banks.clone();
    let loss = composite_loss(tape, &pv, split, batch, &mut staged, cfg, &ccfg, rngs, None)?;
    let mut report = loss.breakdown(tape);
    if !report.total.is_finite() {
        return Err(TrainError::NonFinite);
    }
    let mut grads = tape.gradient(loss.total).wrt_all(pv.all());
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(TrainError::NonFinite);
    }
    report.grad_norm = apply_sgd(params, &mut grads, cfg);
    *banks = staged;
    Ok(report)
}

/// One SGD step on imitation plus actor-critic alone, with no contrastive code
/// involved. Uses the same random streams as [`train_step`].
pub fn train_step_il_rl<F: Scalar>(
    split: &PreparedSplit,
    batch: &[usize],
    params: &mut EncoderParams<F>,
    cfg: &TrainConfig,
    rngs: &mut TrainRngs,
) -> Result<LossBreakdown, TrainError> {
    train_step_il_rl_on(&Tape::new(), split, batch, params, cfg, rngs)
}

fn train_step_il_rl_on<F: Scalar>(
    tape: &Tape<F>,
    split: &PreparedSplit,
    batch: &[usize],
    params: &mut EncoderParams<F>,
    cfg: &TrainConfig,
    rngs: &mut TrainRngs,
) -> Result<LossBreakdown, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let pv = params.load(tape);
    let (il, rl, _) = il_rl_terms(tape, &pv, split, batch, cfg, &mut rngs.rollout, None)?;
    let total = tape.sum(&[il, rl]);
    let mut report = LossBreakdown {
        il: tape.value(il).as_f64(),
        rl: tape.value(rl).as_f64(),
        total: tape.value(total).as_f64(),
        ..LossBreakdown::default()
    };
    if !report.total.is_finite() {
        return Err(TrainError::NonFinite);
    }
    let mut grads = tape.gradient(total).wrt_all(pv.all());
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(TrainError::NonFinite);
    }
    report.grad_norm = apply_sgd(params, &mut grads, cfg);
    Ok(report)
}

/// Which objective a [`Trainer`] optimises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainObjective {
    Composite,
    IlRlOnly,
}

/// Owns parameters, banks, random streams and the epoch order.
#[derive(Clone, Debug)]
pub struct Trainer<F> {
    pub params: EncoderParams<F>,
    pub banks: Banks<F>,
    pub cfg: TrainConfig,
    pub objective: TrainObjective,
    rngs: TrainRngs,
    order: Vec<usize>,
    cursor: usize,
    steps_done: usize,
    tape_hint: (usize, usize),
}

impl<F: Scalar> Trainer<F> {
    pub fn new(dims: Dims, cfg: TrainConfig, seed: u64, objective: TrainObjective) -> Result<Self, TrainError> {
        cfg.validate()?;
        if dims.d != cfg.d {
            return Err(TrainError::Config(format!("encoder width {} != configured d {}", dims.d, cfg.d)));
        }
        Ok(Self {
            params: EncoderParams::init(dims, mix_seed(seed, 1)),
            banks: Banks::new(cfg.bank_capacity),
            cfg,
            objective,
            rngs: TrainRngs::new(seed),
            order: Vec::new(),
            cursor: 0,
            steps_done: 0,
            tape_hint: (0, 0),
        })
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    /// Next batch from a reshuffled epoch order.
    pub fn next_batch(&mut self, n_episodes: usize) -> Vec<usize> {
        let size = self.cfg.batch_size.min(n_episodes);
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.cursor >= self.order.len() {
                self.order = (0..n_episodes).collect();
                self.order.shuffle(&mut self.rngs.batch);
                self.cursor = 0;
            }
            batch.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        batch
    }

    pub fn step(&mut self, split: &PreparedSplit) -> Result<LossBreakdown, TrainError> {
        if split.episodes.is_empty() {
            return Err(TrainError::EmptyBatch);
        }
        let batch = self.next_batch(split.episodes.len());
        // Sized from the previous step to avoid regrowing a large tape.
        let tape = Tape::with_capacity(self.tape_hint.0, self.tape_hint.1);
        let report = match self.objective {
            TrainObjective::Composite => train_step_on(
                &tape,
                split,
                &batch,
                &mut self.params,
                &mut self.banks,
                &self.cfg,
                &mut self.rngs,
            )?,
            TrainObjective::IlRlOnly => {
                train_step_il_rl_on(&tape, split, &batch, &mut self.params, &self.cfg, &mut self.rngs)?
            }
        };
        self.tape_hint = (tape.len() + tape.len() / 4, tape.edge_count() + tape.edge_count() / 4);
        self.steps_done += 1;
        Ok(report)
    }

    /// Runs `cfg.steps` steps, calling `on_step` after each.
    pub fn fit<C>(&mut self, split: &PreparedSplit, mut on_step: C) -> Result<(), TrainError>
    where
        C: FnMut(usize, &LossBreakdown, &Self) -> Result<(), TrainError>,
    {
        for _ in 0..self.cfg.steps {
            let report = self.step(split)?;
            on_step(self.steps_done, &report, self)?;
        }
        Ok(())
    }
}
