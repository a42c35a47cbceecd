use crate::encoder::EmbeddingRecord;
use crate::scalar::Scalar;

use super::circle::cosine_sim;

/// Outcome of pair mining, as index sets into the input positives / negatives.
///
/// Negatives are partitioned into kept, false negatives and easy negatives;
/// positives into kept and discarded.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MinedPairs {
    pub kept_positives: Vec<usize>,
    pub kept_negatives: Vec<usize>,
    pub discarded_false_negatives: Vec<usize>,
    pub discarded_easy: Vec<usize>,
    pub discarded_positives: Vec<usize>,
}

impl MinedPairs {
    /// No negative survived, so the anchor contributes nothing.
    pub fn skipped(&self) -> bool {
        self.kept_negatives.is_empty()
    }
}

/// Hard-pair selection by similarity to the anchor.
///
/// A negative is kept when `1 - m > s_n > min_p s_p - m`; those at or above
/// `1 - m` are false negatives. A positive is then kept when
/// `s_p < max_{kept n} s_n + m`. With no kept negative the anchor is skipped.
pub fn mine_pairs<F: Scalar>(pos_sims: &[F], neg_sims: &[F], m: F) -> MinedPairs {
    let mut out = MinedPairs::default();
    if pos_sims.is_empty() {
        // No positive to compare against: nothing is informative.
        for (j, &s) in neg_sims.iter().enumerate() {
            if s >= F::one() - m {
                out.discarded_false_negatives.push(j);
            } else {
                out.discarded_easy.push(j);
            }
        }
        return out;
    }
    let hardest_pos = pos_sims.iter().copied().fold(F::infinity(), F::min);
    let upper = F::one() - m;
    let lower = hardest_pos - m;
    let mut hardest_neg = F::neg_infinity();
    for (j, &s) in neg_sims.iter().enumerate() {
        if s >= upper {
            out.discarded_false_negatives.push(j);
        } else if s > lower {
            out.kept_negatives.push(j);
            hardest_neg = hardest_neg.max(s);
        } else {
            out.discarded_easy.push(j);
        }
    }
    for (i, &s) in pos_sims.iter().enumerate() {
        if !out.kept_negatives.is_empty() && s < hardest_neg + m {
            out.kept_positives.push(i);
        } else {
            out.discarded_positives.push(i);
        }
    }
    out
}

pub fn pair_mining<F: Scalar>(
    q: &EmbeddingRecord<F>,
    positives: &[EmbeddingRecord<F>],
    negatives: &[EmbeddingRecord<F>],
    m: F,
) -> MinedPairs {
    let sp: Vec<F> = positives.iter().map(|p| cosine_sim(q, p)).collect();
    let sn: Vec<F> = negatives.iter().map(|n| cosine_sim(q, n)).collect();
    mine_pairs(&sp, &sn, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let r = mine_pairs(&[0.9, 0.6], &[0.8, 0.4, 0.2], 0.25);
        assert_eq!(r.discarded_false_negatives, vec![0]);
        assert_eq!(r.kept_negatives, vec![1]);
        assert_eq!(r.discarded_easy, vec![2]);
        assert_eq!(r.kept_positives, vec![1]);
        assert_eq!(r.discarded_positives, vec![0]);
    }

    #[test]
    fn all_false_negatives_skip_the_anchor() {
        let r = mine_pairs(&[0.5], &[0.75, 0.9], 0.25);
        assert!(r.skipped());
        assert!(r.kept_positives.is_empty());
        assert_eq!(r.discarded_false_negatives, vec![0, 1]);
    }

    #[test]
    fn all_easy() {
        let r = mine_pairs(&[0.9, 0.7], &[0.4, 0.1], 0.25);
        assert!(r.skipped());
        assert_eq!(r.discarded_easy, vec![0, 1]);
    }

    #[test]
    fn boundaries_are_strict() {
        let m = 0.25f64;
        let lower = 0.6 - m;
        let r = mine_pairs(&[0.6], &[1.0 - m, lower], m);
        assert!(r.kept_negatives.is_empty());
        assert_eq!(r.discarded_false_negatives, vec![0]);
        assert_eq!(r.discarded_easy, vec![1]);
        // Positive exactly at max_n + m is dropped.
        let sn = 0.5f64;
        let r = mine_pairs(&[sn + m, 0.7], &[sn], m);
        assert_eq!(r.kept_positives, vec![1]);
        assert_eq!(r.discarded_positives, vec![0]);
    }
}
