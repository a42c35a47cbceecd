use crate::autodiff::{Tape, Var};
use crate::scalar::Scalar;

use super::rollout::EpisodeTrace;

/// Mean per-step cross-entropy of the teacher action. Zero for an empty trace.
pub fn il_loss<F: Scalar>(tape: &Tape<F>, trace: &EpisodeTrace) -> Var {
    if trace.steps.is_empty() {
        return tape.constant(F::zero());
    }
    let terms: Vec<Var> = trace
        .steps
        .iter()
        .map(|s| tape.neg(tape.log_softmax_at(&s.logits, s.teacher)))
        .collect();
    tape.mean(&terms)
}

/// Discounted returns, no bootstrap past the last step.
pub fn discounted_returns(rewards: &[f64], discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, r) in rewards.iter().enumerate().rev() {
        acc = r + discount * acc;
        out[t] = acc;
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub struct A2cTerms {
    pub policy: Var,
    pub value: Var,
    pub total: Var,
}

/// `G_t - V(s_t)` at the current parameter values.
pub fn advantages<F: Scalar>(tape: &Tape<F>, trace: &EpisodeTrace, returns: &[f64]) -> Vec<f64> {
    trace
        .steps
        .iter()
        .zip(returns)
        .map(|(s, &g)| g - tape.value(s.value).as_f64())
        .collect()
}

/// Advantage actor-critic on a sampled trace.
///
/// Policy term: `-sum_t log pi(a_t) * (G_t - V_t)` with the baseline held
/// constant. Value term: `value_coef * sum_t (V_t - G_t)^2`.
pub fn a2c_loss<F: Scalar>(tape: &Tape<F>, trace: &EpisodeTrace, discount: f64, value_coef: f64) -> A2cTerms {
    let returns = discounted_returns(&trace.rewards(), discount);
    let adv = advantages(tape, trace, &returns);
    a2c_surrogate(tape, trace, &returns, &adv, value_coef)
}

/// [`a2c_loss`] with the advantages supplied. Its exact gradient is the
/// actor-critic update, which makes it the function to finite-difference.
pub fn a2c_surrogate<F: Scalar>(
    tape: &Tape<F>,
    trace: &EpisodeTrace,
    returns: &[f64],
    advantages: &[f64],
    value_coef: f64,
) -> A2cTerms {
    if trace.steps.is_empty() {
        let z = tape.constant(F::zero());
        return A2cTerms {
            policy: z,
            value: z,
            total: z,
        };
    }
    let mut policy_terms = Vec::with_capacity(returns.len());
    let mut value_terms = Vec::with_capacity(returns.len());
    for ((s, &g), &adv) in trace.steps.iter().zip(returns).zip(advantages) {
        let logp = tape.log_softmax_at(&s.logits, s.action);
        policy_terms.push(tape.scale(logp, F::of(-adv)));
        value_terms.push(tape.square(tape.add_const(s.value, F::of(-g))));
    }
    let policy = tape.sum(&policy_terms);
    let value = tape.scale(tape.sum(&value_terms), F::of(value_coef));
    A2cTerms {
        policy,
        value,
        total: tape.add(policy, value),
    }
}
