use crate::autodiff::{Tape, Var};
use crate::scalar::Scalar;

use super::ContrastError;

/// Multi-positive InfoNCE: the mean over positives of
/// `-log(e^{s_p/τ} / (e^{s_p/τ} + Σ_n e^{s_n/τ}))`.
///
/// Zero when there are no positives.
pub fn info_nce_sims<F: Scalar>(
    tape: &Tape<F>,
    pos_sims: &[Var],
    neg_sims: &[Var],
    temperature: F,
) -> Result<Var, ContrastError> {
    if !(temperature > F::zero()) {
        return Err(ContrastError::Config(format!("temperature must be positive, got {temperature}")));
    }
    if pos_sims.is_empty() {
        return Ok(tape.constant(F::zero()));
    }
    let inv = F::one() / temperature;
    let scaled_neg: Vec<Var> = neg_sims.iter().map(|&s| tape.scale(s, inv)).collect();
    let terms: Vec<Var> = pos_sims
        .iter()
        .map(|&s| {
            let sp = tape.scale(s, inv);
            let mut all = Vec::with_capacity(scaled_neg.len() + 1);
            all.push(sp);
            all.extend_from_slice(&scaled_neg);
            tape.sub(tape.log_sum_exp(&all), sp)
        })
        .collect();
    Ok(tape.mean(&terms))
}

pub fn info_nce_multi<F: Scalar>(
    tape: &Tape<F>,
    q: &[Var],
    positives: &[&[Var]],
    negatives: &[&[Var]],
    temperature: F,
) -> Result<Var, ContrastError> {
    let sp = super::circle::similarities(tape, q, positives);
    let sn = super::circle::similarities(tape, q, negatives);
    info_nce_sims(tape, &sp, &sn, temperature)
}
