//! Wikidata entity linking: candidate search, feature ranking, NIL decisions.
//!
//! A candidate's score is
//! `w_match * string_match + w_prom * ln(1 + p) / ln(1 + p_max)
//!  + w_ctx * cos(tfidf(context), tfidf(description + abstract)) + w_type * [typed]`,
//! where `p` is the sitelink count, `p_max` the largest among the candidates,
//! and `typed` whether the candidate has a relevant type. The context vector
//! leaves out the mention's own terms. Ties go to the
//! smaller numeric Q-id.

mod client;
mod tfidf;

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{
    claim_targets, fixture_client, fixture_slug, parse_entity, parse_search, CachedClient, CandidateSource,
    FixtureClient, FixtureFile, LiveClient, MAX_CANDIDATES,
};
pub use tfidf::{cosine, terms, TfIdf};

use crate::mention::Mention;
use crate::text::Document;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinkError {
    #[error("candidate search failed: {0}")]
    Client(String),
    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),
    #[error("invalid linker config: {0}")]
    Config(String),
}

/// A knowledge-base item that a mention may refer to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCandidate {
    pub qid: String,
    pub label: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub description: String,
    /// direct and inherited class ids
    #[serde(default)]
    pub types: Vec<String>,
    /// sitelink count
    #[serde(default)]
    pub prominence: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abstract_first_sentence: Option<String>,
}

/// Numeric part of a `Q123` id.
pub fn qid_number(qid: &str) -> Option<u64> {
    let digits = qid.strip_prefix('Q')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

impl LinkCandidate {
    pub fn validate(&self) -> Result<(), LinkError> {
        if qid_number(&self.qid).is_none() {
            return Err(LinkError::InvalidCandidate(format!("`{}` is not a Q-id", self.qid)));
        }
        Ok(())
    }

    fn context_text(&self) -> String {
        match &self.abstract_first_sentence {
            Some(a) => format!("{} {}", self.description, a),
            None => self.description.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkWeights {
    pub w_match: f64,
    pub w_prom: f64,
    pub w_ctx: f64,
    pub w_type: f64,
    pub nil_threshold: f64,
}

impl Default for LinkWeights {
    fn default() -> Self {
        LinkWeights { w_match: 0.4, w_prom: 0.2, w_ctx: 0.3, w_type: 0.1, nil_threshold: 0.35 }
    }
}

/// The four feature values before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub string_match: f64,
    pub prominence: f64,
    pub context: f64,
    pub type_match: f64,
}

impl Features {
    pub fn score(&self, w: &LinkWeights) -> f64 {
        w.w_match * self.string_match + w.w_prom * self.prominence + w.w_ctx * self.context + w.w_type * self.type_match
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedCandidate {
    pub candidate: LinkCandidate,
    pub features: Features,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "qid", rename_all = "snake_case")]
pub enum Decision {
    Linked(String),
    Nil,
    NotLinkable,
}

impl Decision {
    pub fn qid(&self) -> Option<&str> {
        match self {
            Decision::Linked(q) => Some(q),
            _ => None,
        }
    }
}

/// Candidates sorted by descending score, and the decision taken.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub ranked: Vec<RankedCandidate>,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkResult {
    pub mention: Mention,
    pub surface: String,
    pub ranked: Vec<RankedCandidate>,
    pub decision: Decision,
}

fn fold(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Longest common substring length, in chars.
fn lcs_len(a: &[char], b: &[char]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut best = 0;
    for &ca in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, &cb) in b.iter().enumerate() {
            if ca == cb {
                cur[j + 1] = prev[j] + 1;
                best = best.max(cur[j + 1]);
            }
        }
        prev = cur;
    }
    best
}

/// 1.0 for an exact (case-insensitive) label, 0.8 for an exact alias,
/// otherwise the longest common substring over the longer string's length,
/// taking the best of label and aliases.
pub fn string_match(surface: &str, candidate: &LinkCandidate) -> f64 {
    let s = fold(surface);
    if s == fold(&candidate.label) {
        return 1.0;
    }
    if candidate.aliases.iter().any(|a| fold(a) == s) {
        return 0.8;
    }
    let sc: Vec<char> = s.chars().collect();
    std::iter::once(&candidate.label)
        .chain(&candidate.aliases)
        .map(|name| {
            let nc: Vec<char> = fold(name).chars().collect();
            let longest = sc.len().max(nc.len());
            if longest == 0 {
                0.0
            } else {
                lcs_len(&sc, &nc) as f64 / longest as f64
            }
        })
        .fold(0.0, f64::max)
}

fn by_score_then_qid(a: &RankedCandidate, b: &RankedCandidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| qid_number(&a.candidate.qid).cmp(&qid_number(&b.candidate.qid)))
        .then_with(|| a.candidate.qid.cmp(&b.candidate.qid))
}

/// Scores and orders candidates for one mention.
pub fn rank(
    surface: &str,
    context: &str,
    candidates: &[LinkCandidate],
    weights: &LinkWeights,
    relevant_types: &BTreeSet<String>,
) -> Ranking {
    let max_prom = candidates.iter().map(|c| c.prominence).max().unwrap_or(0);
    let denom = (1.0 + max_prom as f64).ln();
    let mut texts: Vec<String> = vec![context.to_string()];
    texts.extend(candidates.iter().map(LinkCandidate::context_text));
    let model = TfIdf::fit(&texts);
    // the surface is scored by string_match; context measures the surroundings
    let own: BTreeSet<String> = terms(surface).into_iter().collect();
    let mut ctx_vec = model.vector(context);
    ctx_vec.retain(|t, _| !own.contains(t));

    let mut ranked: Vec<RankedCandidate> = candidates
        .iter()
        .zip(&texts[1..])
        .map(|(c, text)| {
            let features = Features {
                string_match: string_match(surface, c),
                prominence: if denom > 0.0 { (1.0 + c.prominence as f64).ln() / denom } else { 0.0 },
                context: cosine(&ctx_vec, &model.vector(text)),
                type_match: if c.types.iter().any(|t| relevant_types.contains(t)) { 1.0 } else { 0.0 },
            };
            RankedCandidate { candidate: c.clone(), score: features.score(weights), features }
        })
        .collect();
    ranked.sort_by(by_score_then_qid);
    let decision = match ranked.first() {
        Some(top) if top.score >= weights.nil_threshold => Decision::Linked(top.candidate.qid.clone()),
        _ => Decision::Nil,
    };
    Ranking { ranked, decision }
}

/// Linker settings: weights, relevant class ids, and which labels to link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub weights: LinkWeights,
    pub relevant_types: BTreeSet<String>,
    pub linkable_labels: BTreeSet<String>,
}

pub const LINKABLE_LABELS: [&str; 10] = [
    "Threat_Actor",
    "Malware_Name",
    "Software_Name",
    "Operating_System",
    "Campaign",
    "ORG",
    "GPE",
    "PERSON",
    "Programming_Language",
    "Protocol",
];

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            weights: LinkWeights::default(),
            relevant_types: shipped_relevant_types().into_iter().map(|t| t.qid).collect(),
            linkable_labels: LINKABLE_LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// An entry of the shipped relevant-type list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevantType {
    pub qid: String,
    pub label: String,
}

#[derive(Deserialize)]
struct RelevantTypesFile {
    types: Vec<RelevantType>,
}

/// Parses a relevant-types file: `{"types": [{"qid": .., "label": ..}]}`.
pub fn parse_relevant_types(json: &str) -> Result<Vec<RelevantType>, LinkError> {
    let f: RelevantTypesFile = serde_json::from_str(json).map_err(|e| LinkError::Config(e.to_string()))?;
    for t in &f.types {
        if qid_number(&t.qid).is_none() {
            return Err(LinkError::Config(format!("`{}` is not a Q-id", t.qid)));
        }
    }
    Ok(f.types)
}

pub fn shipped_relevant_types() -> Vec<RelevantType> {
    parse_relevant_types(include_str!("../../data/linker/relevant_types.json")).expect("shipped types parse")
}

/// Links from one document: per-mention results plus per-mention failures.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DocumentLinks {
    pub results: Vec<LinkResult>,
    pub errors: Vec<(Mention, LinkError)>,
}

/// The mention's sentence with one sentence either side.
pub fn mention_context(doc: &Document, mention: &Mention) -> String {
    let sents = doc.sentences();
    let Some(i) = doc.sentence_of(mention.start) else {
        return doc.slice(mention.start, mention.end).to_string();
    };
    let start = sents[i.saturating_sub(1)].0;
    let end = sents[(i + 1).min(sents.len() - 1)].1;
    doc.slice(start, end).to_string()
}

/// Links every mention of a document. Labels outside the linkable set get
/// [`Decision::NotLinkable`] without a search; search failures are recorded
/// and the rest of the batch continues.
pub fn link_document(
    doc: &Document,
    mentions: &[Mention],
    client: &dyn CandidateSource,
    config: &LinkConfig,
) -> DocumentLinks {
    let mut out = DocumentLinks::default();
    for m in mentions {
        let surface = doc.slice(m.start, m.end).to_string();
        if !config.linkable_labels.contains(&m.label) {
            out.results.push(LinkResult {
                mention: m.clone(),
                surface,
                ranked: Vec::new(),
                decision: Decision::NotLinkable,
            });
            continue;
        }
        match client.search(&surface) {
            Ok(cands) => {
                let context = mention_context(doc, m);
                let r = rank(&surface, &context, &cands, &config.weights, &config.relevant_types);
                out.results.push(LinkResult { mention: m.clone(), surface, ranked: r.ranked, decision: r.decision });
            }
            Err(e) => out.errors.push((m.clone(), e)),
        }
    }
    out
}
