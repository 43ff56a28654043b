use std::collections::{BTreeMap, BTreeSet};

use cyents::schema::VersionId;
use cyents::text::Corpus;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

fn round2() -> VersionId {
    VersionId::Round2
}

/// One annotator pair and the documents both of them label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub annotators: Vec<String>,
    /// Task order; every store document, sorted, when absent.
    #[serde(default)]
    pub docs: Option<Vec<String>>,
}

/// Static study configuration, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "round2")]
    pub schema_version: VersionId,
    pub groups: BTreeMap<String, GroupConfig>,
    /// annotator id -> token expected in `X-Annotator-Token`; no checks when empty
    #[serde(default)]
    pub tokens: BTreeMap<String, String>,
    /// serve only the first N topical paragraphs of each document
    #[serde(default)]
    pub paragraphs_per_doc: Option<usize>,
}

impl ServiceConfig {
    /// Two annotators per group, each annotator in one group, known documents.
    pub fn validate(&self, corpus: &Corpus) -> Result<(), ServiceError> {
        let bad = |m: String| Err(ServiceError::Config(m));
        if self.groups.is_empty() {
            return bad("no annotator groups configured".into());
        }
        let mut seen = BTreeSet::new();
        for (g, cfg) in &self.groups {
            if cfg.annotators.len() != 2 {
                return bad(format!("group `{g}` needs exactly two annotators, has {}", cfg.annotators.len()));
            }
            for a in &cfg.annotators {
                if a.is_empty() || a.contains(['/', '\\']) || a.starts_with('.') {
                    return bad(format!("unusable annotator id `{a}`"));
                }
                if !seen.insert(a.as_str()) {
                    return bad(format!("annotator `{a}` appears in more than one group"));
                }
            }
            for d in cfg.docs.iter().flatten() {
                if !corpus.contains_key(d) {
                    return bad(format!("group `{g}` lists unknown document `{d}`"));
                }
            }
        }
        for a in self.tokens.keys() {
            if !seen.contains(a.as_str()) {
                return bad(format!("token given for unregistered annotator `{a}`"));
            }
        }
        Ok(())
    }

    pub fn group_of(&self, annotator: &str) -> Option<&str> {
        self.groups.iter().find(|(_, g)| g.annotators.iter().any(|a| a == annotator)).map(|(k, _)| k.as_str())
    }
}
