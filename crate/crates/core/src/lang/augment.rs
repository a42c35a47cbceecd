use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::client::{EditRequest, TableRewriteClient, TextEditClient};
use super::doc::{tokenize, InstructionDoc, Provenance};
use super::LangError;

/// Word to synonym table. Each entry lists at least one distinct alternative,
/// none equal to the word itself. Synonyms may span several words.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl Lexicon {
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Result<Self, LangError> {
        for (word, alts) in &entries {
            if alts.is_empty() {
                return Err(LangError::Lexicon(format!("'{word}' has no synonyms")));
            }
            if alts.iter().any(|a| a == word) {
                return Err(LangError::Lexicon(format!("'{word}' maps to itself")));
            }
            let mut sorted = alts.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != alts.len() {
                return Err(LangError::Lexicon(format!("'{word}' has repeated synonyms")));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, LangError> {
        let text = std::fs::read_to_string(path)?;
        Self::new(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("string map serialises")
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<String>> {
        &self.entries
    }

    /// Table mapping each single-word entry to its first single-word synonym.
    pub fn normalization_table(&self) -> BTreeMap<String, String> {
        self.entries
            .iter()
            .filter_map(|(w, alts)| {
                alts.iter()
                    .find(|a| !a.contains(' '))
                    .map(|a| (w.clone(), a.clone()))
            })
            .collect()
    }

    /// Every word appearing in the table.
    pub fn words(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries
            .iter()
            .flat_map(|(w, alts)| std::iter::once(w.as_str()).chain(alts.iter().flat_map(|a| a.split_whitespace())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AugmentMethod {
    Synonym,
    Contextual,
    BackTranslation,
}

impl AugmentMethod {
    pub const ALL: [AugmentMethod; 3] = [Self::Synonym, Self::Contextual, Self::BackTranslation];

    fn salt(self) -> u64 {
        match self {
            Self::Synonym => 0x5157_4e4f,
            Self::Contextual => 0x4354_5854,
            Self::BackTranslation => 0x4254_524e,
        }
    }
}

#[derive(Clone)]
pub struct AugmenterConfig {
    pub lexicon: Arc<Lexicon>,
    /// Used by the back-translation stand-in when no `mt_client` is set.
    pub normalization: Arc<BTreeMap<String, String>>,
    pub lm_client: Option<Arc<dyn TextEditClient>>,
    pub mt_client: Option<Arc<dyn TextEditClient>>,
    pub rng_seed: u64,
    /// Per-token replacement probability for lexicon hits.
    pub replace_prob: f64,
    pub timeout: Duration,
}

impl AugmenterConfig {
    pub fn new(lexicon: Lexicon) -> Self {
        let normalization = Arc::new(lexicon.normalization_table());
        Self {
            lexicon: Arc::new(lexicon),
            normalization,
            lm_client: None,
            mt_client: None,
            rng_seed: 0,
            replace_prob: 0.3,
            timeout: Duration::from_secs(5),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..self.clone()
        }
    }
}

impl std::fmt::Debug for AugmenterConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AugmenterConfig")
            .field("lexicon_entries", &self.lexicon.entries.len())
            .field("lm_client", &self.lm_client.is_some())
            .field("mt_client", &self.mt_client.is_some())
            .field("rng_seed", &self.rng_seed)
            .field("replace_prob", &self.replace_prob)
            .finish()
    }
}

/// Produces a meaning-preserving variant of an original instruction.
///
/// Spans are rewritten independently so the sub-instruction structure is kept.
/// A result whose tokens equal the input is returned as
/// [`Provenance::OriginalCopy`].
pub fn augment_positive(
    doc: &InstructionDoc,
    cfg: &AugmenterConfig,
    method: AugmentMethod,
) -> Result<InstructionDoc, LangError> {
    if doc.provenance() != Provenance::Original {
        return Err(LangError::NotOriginal(doc.provenance()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ method.salt());
    let (spans, provenance) = match method {
        AugmentMethod::Synonym => (synonym_spans(doc, cfg, &mut rng), Provenance::Synonym),
        AugmentMethod::Contextual => match &cfg.lm_client {
            Some(client) => (client_spans(doc, client.as_ref(), Provenance::Contextual, cfg)?, Provenance::Contextual),
            None => (synonym_spans(doc, cfg, &mut rng), Provenance::Synonym),
        },
        AugmentMethod::BackTranslation => {
            let spans = match &cfg.mt_client {
                Some(client) => client_spans(doc, client.as_ref(), Provenance::Backtranslated, cfg)?,
                None => {
                    let stub = TableRewriteClient::new((*cfg.normalization).clone());
                    client_spans(doc, &stub, Provenance::Backtranslated, cfg)?
                }
            };
            (spans, Provenance::Backtranslated)
        }
    };
    let out = InstructionDoc::from_spans(spans, provenance)?;
    if out.tokens() == doc.tokens() {
        return Ok(out.with_provenance(Provenance::OriginalCopy));
    }
    Ok(out)
}

fn synonym_spans(doc: &InstructionDoc, cfg: &AugmenterConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    doc.spans()
        .map(|span| {
            let mut out = Vec::with_capacity(span.len());
            for tok in span {
                match cfg.lexicon.get(tok) {
                    Some(alts) if rng.gen_bool(cfg.replace_prob) => {
                        let pick = alts.choose(rng).expect("non-empty synonyms");
                        out.extend(pick.split_whitespace().map(str::to_string));
                    }
                    _ => out.push(tok.clone()),
                }
            }
            out
        })
        .collect()
}

fn client_spans(
    doc: &InstructionDoc,
    client: &dyn TextEditClient,
    provenance: Provenance,
    cfg: &AugmenterConfig,
) -> Result<Vec<Vec<String>>, LangError> {
    doc.spans()
        .map(|span| {
            let request = EditRequest {
                text: span.join(" "),
                provenance,
                timeout: cfg.timeout,
            };
            let reply = tokenize(&client.edit(&request)?.text);
            Ok(if reply.is_empty() { span.to_vec() } else { reply })
        })
        .collect()
}
