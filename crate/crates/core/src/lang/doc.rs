use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LangError;

/// Verbs that mark the start of a navigation clause.
pub const NAV_KEYWORDS: &[&str] = &[
    "walk", "go", "turn", "head", "move", "continue", "proceed", "exit", "enter", "stop", "wait",
    "take", "climb", "pass", "follow", "cross", "veer", "keep", "make", "step",
];

const HARD_DELIMITERS: &[&str] = &[",", ".", ";"];
const CONJUNCTIONS: &[&str] = &["and", "then"];

pub fn is_nav_keyword(token: &str) -> bool {
    NAV_KEYWORDS.contains(&token)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    /// Augmentation produced no change; callers may drop it.
    OriginalCopy,
    Synonym,
    Contextual,
    Backtranslated,
    ShuffledNegative,
    RepeatedNegative,
}

/// Tokenised instruction with sub-instruction spans.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstructionDoc {
    tokens: Vec<String>,
    /// Half-open `[start, end)` ranges partitioning `tokens` in order.
    sub_spans: Vec<(usize, usize)>,
    provenance: Provenance,
}

impl InstructionDoc {
    /// Checks the span partition invariant.
    pub fn new(
        tokens: Vec<String>,
        sub_spans: Vec<(usize, usize)>,
        provenance: Provenance,
    ) -> Result<Self, LangError> {
        if tokens.is_empty() {
            return Err(LangError::Empty);
        }
        if sub_spans.is_empty() {
            return Err(LangError::BadSpans("no spans".into()));
        }
        let mut at = 0;
        for &(s, e) in &sub_spans {
            if s != at || e <= s {
                return Err(LangError::BadSpans(format!("span ({s},{e}) at offset {at}")));
            }
            at = e;
        }
        if at != tokens.len() {
            return Err(LangError::BadSpans(format!(
                "spans cover {at} of {} tokens",
                tokens.len()
            )));
        }
        Ok(Self {
            tokens,
            sub_spans,
            provenance,
        })
    }

    /// Builds a document from span token lists, computing offsets.
    pub fn from_spans(spans: Vec<Vec<String>>, provenance: Provenance) -> Result<Self, LangError> {
        let mut tokens = Vec::new();
        let mut sub_spans = Vec::with_capacity(spans.len());
        for span in spans {
            let start = tokens.len();
            tokens.extend(span);
            sub_spans.push((start, tokens.len()));
        }
        Self::new(tokens, sub_spans, provenance)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn sub_spans(&self) -> &[(usize, usize)] {
        &self.sub_spans
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn num_spans(&self) -> usize {
        self.sub_spans.len()
    }

    pub fn span_tokens(&self, i: usize) -> &[String] {
        let (s, e) = self.sub_spans[i];
        &self.tokens[s..e]
    }

    pub fn spans(&self) -> impl Iterator<Item = &[String]> + '_ {
        (0..self.num_spans()).map(|i| self.span_tokens(i))
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub(crate) fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }
}

/// Lowercases and splits on whitespace, detaching `,` `.` `;` into their own tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let lower = word.to_lowercase();
        let mut rest = lower.as_str();
        let mut trailing = Vec::new();
        while let Some(c) = rest.chars().last().filter(|c| matches!(c, ',' | '.' | ';')) {
            trailing.push(c.to_string());
            rest = &rest[..rest.len() - c.len_utf8()];
        }
        if !rest.is_empty() {
            out.push(rest.to_string());
        }
        out.extend(trailing.into_iter().rev());
    }
    out
}

/// Splits at hard delimiters, and at `and`/`then` when the text on both sides
/// contains a navigation verb. Delimiters stay with the span on their left.
pub fn split_sub_instructions(tokens: &[String]) -> Result<InstructionDoc, LangError> {
    if tokens.is_empty() {
        return Err(LangError::Empty);
    }
    let n = tokens.len();
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 0..n {
        let tok = tokens[i].as_str();
        let cut = if HARD_DELIMITERS.contains(&tok) {
            true
        } else if CONJUNCTIONS.contains(&tok) {
            let right_end = tokens[i + 1..]
                .iter()
                .position(|t| HARD_DELIMITERS.contains(&t.as_str()))
                .map_or(n, |p| i + 1 + p);
            let has_verb = |ts: &[String]| ts.iter().any(|t| is_nav_keyword(t));
            has_verb(&tokens[start..i]) && has_verb(&tokens[i + 1..right_end])
        } else {
            false
        };
        if cut {
            spans.push((start, i + 1));
            start = i + 1;
        }
    }
    if start < n {
        spans.push((start, n));
    }
    InstructionDoc::new(tokens.to_vec(), spans, Provenance::Original)
}

/// Neighbour-based positives and non-neighbour intra-negatives for one query span.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubInstructionSets {
    pub query_idx: usize,
    pub positives: Vec<usize>,
    pub intra_negatives: Vec<usize>,
}

/// Requires at least two spans so the query has a neighbour.
pub fn sub_instruction_sets(doc: &InstructionDoc, query_idx: usize) -> Result<SubInstructionSets, LangError> {
    let k = doc.num_spans();
    if query_idx >= k {
        return Err(LangError::QueryOutOfRange { query_idx, spans: k });
    }
    if k < 2 {
        return Err(LangError::TooFewSpans);
    }
    let is_neighbor = |i: usize| i + 1 == query_idx || i == query_idx + 1;
    let positives = (0..k).filter(|&i| is_neighbor(i)).collect();
    let intra_negatives = (0..k).filter(|&i| i != query_idx && !is_neighbor(i)).collect();
    Ok(SubInstructionSets {
        query_idx,
        positives,
        intra_negatives,
    })
}

/// Shuffles or repeats sub-instructions to build a negative instruction.
///
/// With two or more spans: a non-identity reordering with probability 0.5,
/// otherwise one span duplicated in place. A single span is always duplicated.
pub fn make_intra_negative(doc: &InstructionDoc, seed: u64) -> InstructionDoc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spans: Vec<Vec<String>> = doc.spans().map(<[String]>::to_vec).collect();
    let distinct = spans.iter().skip(1).any(|s| s != &spans[0]);
    if spans.len() >= 2 && distinct && rng.gen_bool(0.5) {
        let mut order: Vec<usize> = (0..spans.len()).collect();
        let reassemble = |order: &[usize]| order.iter().map(|&i| spans[i].clone()).collect::<Vec<_>>();
        let mut shuffled = None;
        for _ in 0..10 {
            order.shuffle(&mut rng);
            let cand = reassemble(&order);
            if cand != spans {
                shuffled = Some(cand);
                break;
            }
        }
        let shuffled = shuffled.unwrap_or_else(|| {
            // Swap the first span with the first one that differs from it.
            let j = spans.iter().position(|s| s != &spans[0]).expect("distinct spans");
            let mut order: Vec<usize> = (0..spans.len()).collect();
            order.swap(0, j);
            reassemble(&order)
        });
        return InstructionDoc::from_spans(shuffled, Provenance::ShuffledNegative).expect("non-empty spans");
    }
    let i = rng.gen_range(0..spans.len());
    let mut out = spans.clone();
    out.insert(i + 1, spans[i].clone());
    InstructionDoc::from_spans(out, Provenance::RepeatedNegative).expect("non-empty spans")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn tokenizer_detaches_punctuation() {
        assert_eq!(toks("Walk straight, then turn LEFT."), vec!["walk", "straight", ",", "then", "turn", "left", "."]);
    }

    #[test]
    fn split_examples() {
        let d = split_sub_instructions(&toks("walk straight , then turn left")).unwrap();
        assert_eq!(d.sub_spans(), &[(0, 3), (3, 6)]);
        let d = split_sub_instructions(&toks("turn left")).unwrap();
        assert_eq!(d.sub_spans(), &[(0, 2)]);
        let d = split_sub_instructions(&toks("walk past the sofa and turn right")).unwrap();
        assert_eq!(d.sub_spans(), &[(0, 5), (5, 7)]);
        // No verb on the right of "and": no split.
        let d = split_sub_instructions(&toks("walk past the sofa and the lamp")).unwrap();
        assert_eq!(d.num_spans(), 1);
        assert!(split_sub_instructions(&[]).is_err());
    }

    #[test]
    fn neighbour_sets() {
        let d = split_sub_instructions(&toks("go a , go b , go c , go d")).unwrap();
        assert_eq!(d.num_spans(), 4);
        let s = sub_instruction_sets(&d, 1).unwrap();
        assert_eq!((s.positives, s.intra_negatives), (vec![0, 2], vec![3]));
        let s = sub_instruction_sets(&d, 0).unwrap();
        assert_eq!((s.positives, s.intra_negatives), (vec![1], vec![2, 3]));
        assert!(sub_instruction_sets(&d, 4).is_err());
        let two = split_sub_instructions(&toks("go a , go b")).unwrap();
        let s = sub_instruction_sets(&two, 0).unwrap();
        assert_eq!((s.positives, s.intra_negatives), (vec![1], vec![]));
    }

    #[test]
    fn negatives() {
        let single = split_sub_instructions(&toks("turn left")).unwrap();
        let neg = make_intra_negative(&single, 3);
        assert_eq!(neg.text(), "turn left turn left");
        assert_eq!(neg.provenance(), Provenance::RepeatedNegative);

        let two = split_sub_instructions(&toks("go a , turn b")).unwrap();
        for seed in 0..20 {
            let neg = make_intra_negative(&two, seed);
            assert_ne!(neg.tokens(), two.tokens());
            if neg.provenance() == Provenance::ShuffledNegative {
                assert_eq!(neg.text(), "turn b go a ,");
            }
        }
        let three = split_sub_instructions(&toks("go a , turn b , stop c")).unwrap();
        assert_eq!(make_intra_negative(&three, 11), make_intra_negative(&three, 11));
    }
}
