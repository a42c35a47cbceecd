//! Request/response text-edit clients used by the contextual and
//! back-translation augmenters, plus deterministic offline stand-ins.

use std::collections::BTreeMap;
use std::time::Duration;

use super::doc::{is_nav_keyword, Provenance};

#[derive(Clone, Debug, PartialEq)]
pub struct EditRequest {
    pub text: String,
    /// Which augmentation is being asked for.
    pub provenance: Provenance,
    pub timeout: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EditResponse {
    pub text: String,
    pub provenance: Provenance,
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("client failure: {0}")]
    Failed(String),
}

/// Single-request text in, text out. Implementations must be shareable across threads.
pub trait TextEditClient: Send + Sync {
    fn edit(&self, request: &EditRequest) -> Result<EditResponse, ClientError>;
}

/// Word-for-word table rewrite; the offline stand-in for a round-trip translation.
#[derive(Clone, Debug, Default)]
pub struct TableRewriteClient {
    table: BTreeMap<String, String>,
}

impl TableRewriteClient {
    pub fn new(table: BTreeMap<String, String>) -> Self {
        Self { table }
    }
}

impl TextEditClient for TableRewriteClient {
    fn edit(&self, request: &EditRequest) -> Result<EditResponse, ClientError> {
        let text = request
            .text
            .split_whitespace()
            .map(|w| self.table.get(w).map_or(w, String::as_str))
            .collect::<Vec<_>>()
            .join(" ");
        Ok(EditResponse {
            text,
            provenance: request.provenance,
        })
    }
}

/// Inserts a fixed modifier after every navigation verb; the offline stand-in
/// for a masked language model.
#[derive(Clone, Debug)]
pub struct InsertionStubClient {
    modifier: String,
}

impl InsertionStubClient {
    pub fn new(modifier: impl Into<String>) -> Self {
        Self {
            modifier: modifier.into(),
        }
    }
}

impl Default for InsertionStubClient {
    fn default() -> Self {
        Self::new("carefully")
    }
}

impl TextEditClient for InsertionStubClient {
    fn edit(&self, request: &EditRequest) -> Result<EditResponse, ClientError> {
        let mut out = Vec::new();
        for w in request.text.split_whitespace() {
            out.push(w);
            if is_nav_keyword(w) {
                out.push(&self.modifier);
            }
        }
        Ok(EditResponse {
            text: out.join(" "),
            provenance: request.provenance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str) -> EditRequest {
        EditRequest {
            text: text.into(),
            provenance: Provenance::Backtranslated,
            timeout: Duration::from_secs(1),
        }
    }

    #[test]
    fn table_rewrite() {
        let c = TableRewriteClient::new(
            [("go", "walk"), ("sofa", "couch")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        );
        assert_eq!(c.edit(&req("go towards the sofa")).unwrap().text, "walk towards the couch");
    }

    #[test]
    fn insertion_stub() {
        let c = InsertionStubClient::default();
        assert_eq!(c.edit(&req("walk to the lamp ,")).unwrap().text, "walk carefully to the lamp ,");
    }
}
