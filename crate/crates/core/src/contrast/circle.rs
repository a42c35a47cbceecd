use crate::autodiff::{Tape, Var};
use crate::encoder::EmbeddingRecord;
use crate::scalar::Scalar;

use super::ContrastError;

/// Margin `m` and scale `gamma` of the circle loss.
///
/// The optima and decision margins derive from `m`:
/// `O_n = -m`, `Δ_n = m`, `O_p = 1 + m`, `Δ_p = 1 - m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginConfig<F> {
    m: F,
    gamma: F,
}

impl<F: Scalar> MarginConfig<F> {
    pub fn new(m: F, gamma: F) -> Result<Self, ContrastError> {
        if !(m > F::zero() && m < F::one()) {
            return Err(ContrastError::Config(format!("margin must lie in (0, 1), got {m}")));
        }
        if !(gamma > F::zero() && gamma.is_finite()) {
            return Err(ContrastError::Config(format!("scale must be positive, got {gamma}")));
        }
        Ok(Self { m, gamma })
    }

    pub fn m(&self) -> F {
        self.m
    }

    pub fn gamma(&self) -> F {
        self.gamma
    }

    pub fn o_n(&self) -> F {
        -self.m
    }

    pub fn delta_n(&self) -> F {
        self.m
    }

    pub fn o_p(&self) -> F {
        F::one() + self.m
    }

    pub fn delta_p(&self) -> F {
        F::one() - self.m
    }
}

impl<F: Scalar> Default for MarginConfig<F> {
    /// `m = 0.25`, `gamma = 32`.
    fn default() -> Self {
        Self::new(F::of(0.25), F::of(32.0)).expect("valid defaults")
    }
}

/// Dot product of unit vectors.
pub fn cosine_sim<F: Scalar>(a: &EmbeddingRecord<F>, b: &EmbeddingRecord<F>) -> F {
    a.vec.iter().zip(&b.vec).map(|(&x, &y)| x * y).sum()
}

/// Self-paced negative logit `γ [s - O_n]_+ (s - Δ_n)`.
pub fn negative_logit<F: Scalar>(tape: &Tape<F>, s: Var, cfg: &MarginConfig<F>) -> Var {
    let weight = tape.relu(tape.add_const(s, -cfg.o_n()));
    let offset = tape.add_const(s, -cfg.delta_n());
    tape.scale(tape.mul(weight, offset), cfg.gamma)
}

/// Self-paced positive logit `-γ [O_p - s]_+ (s - Δ_p)`.
pub fn positive_logit<F: Scalar>(tape: &Tape<F>, s: Var, cfg: &MarginConfig<F>) -> Var {
    let weight = tape.relu(tape.add_const(tape.neg(s), cfg.o_p()));
    let offset = tape.add_const(s, -cfg.delta_p());
    tape.scale(tape.mul(weight, offset), -cfg.gamma)
}

/// `log[1 + Σ_j exp(l_n^j) Σ_i exp(l_p^i)]` over precomputed similarities.
///
/// Evaluated as `softplus(LSE(l_n) + LSE(l_p))`; zero when either set is empty.
pub fn circle_loss_sims<F: Scalar>(
    tape: &Tape<F>,
    pos_sims: &[Var],
    neg_sims: &[Var],
    cfg: &MarginConfig<F>,
) -> Result<Var, ContrastError> {
    if pos_sims.is_empty() || neg_sims.is_empty() {
        return Ok(tape.constant(F::zero()));
    }
    if pos_sims.iter().chain(neg_sims).any(|&s| !tape.value(s).is_finite()) {
        return Err(ContrastError::NonFinite);
    }
    let ln: Vec<Var> = neg_sims.iter().map(|&s| negative_logit(tape, s, cfg)).collect();
    let lp: Vec<Var> = pos_sims.iter().map(|&s| positive_logit(tape, s, cfg)).collect();
    let z = tape.add(tape.log_sum_exp(&ln), tape.log_sum_exp(&lp));
    Ok(tape.softplus(z))
}

pub fn similarities<F: Scalar>(tape: &Tape<F>, q: &[Var], others: &[&[Var]]) -> Vec<Var> {
    others.iter().map(|o| tape.dot(q, o)).collect()
}

/// Circle loss of anchor `q` against positive and negative embeddings.
pub fn circle_loss<F: Scalar>(
    tape: &Tape<F>,
    q: &[Var],
    positives: &[&[Var]],
    negatives: &[&[Var]],
    cfg: &MarginConfig<F>,
) -> Result<Var, ContrastError> {
    let sp = similarities(tape, q, positives);
    let sn = similarities(tape, q, negatives);
    circle_loss_sims(tape, &sp, &sn, cfg)
}

/// Value-only circle loss over stored records.
pub fn circle_loss_value<F: Scalar>(
    q: &EmbeddingRecord<F>,
    positives: &[EmbeddingRecord<F>],
    negatives: &[EmbeddingRecord<F>],
    cfg: &MarginConfig<F>,
) -> Result<F, ContrastError> {
    let tape = Tape::new();
    let sp: Vec<Var> = positives.iter().map(|p| tape.constant(cosine_sim(q, p))).collect();
    let sn: Vec<Var> = negatives.iter().map(|n| tape.constant(cosine_sim(q, n))).collect();
    Ok(tape.value(circle_loss_sims(&tape, &sp, &sn, cfg)?))
}
