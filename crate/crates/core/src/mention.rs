use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Which component produced a mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Rule,
    Model,
    Human,
    Linker,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Rule => "rule",
            Provenance::Model => "model",
            Provenance::Human => "human",
            Provenance::Linker => "linker",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rule" => Ok(Provenance::Rule),
            "model" => Ok(Provenance::Model),
            "human" => Ok(Provenance::Human),
            "linker" => Ok(Provenance::Linker),
            other => Err(format!("unknown provenance `{other}`")),
        }
    }
}

/// A typed span over a document's text, in char offsets, end-exclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub provenance: Provenance,
    #[serde(default = "full_score", skip_serializing_if = "is_full_score")]
    pub score: f64,
}

fn full_score() -> f64 {
    1.0
}

fn is_full_score(s: &f64) -> bool {
    *s == 1.0
}

impl Mention {
    pub fn new(start: usize, end: usize, label: impl Into<String>, provenance: Provenance) -> Self {
        Mention { start, end, label: label.into(), provenance, score: 1.0 }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    pub fn overlaps(&self, other: &Mention) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Span and label identity, the agreement and evaluation key.
    pub fn key(&self) -> (usize, usize, &str) {
        (self.start, self.end, self.label.as_str())
    }
}

/// Greedy leftmost-longest selection of non-overlapping mentions.
///
/// Ties on identical spans go to the label that sorts first.
pub fn leftmost_longest(mut mentions: Vec<Mention>) -> Vec<Mention> {
    mentions.sort_by(|a, b| {
        a.start
            .cmp(&b.start)
            .then(b.end.cmp(&a.end))
            .then_with(|| a.label.cmp(&b.label))
    });
    let mut out: Vec<Mention> = Vec::with_capacity(mentions.len());
    for m in mentions {
        if out.last().map_or(true, |last| m.start >= last.end) {
            out.push(m);
        }
    }
    out
}

/// Adds `extra` mentions that do not overlap any in `kept`; result is sorted.
pub fn merge_with_priority(kept: Vec<Mention>, extra: Vec<Mention>) -> Vec<Mention> {
    let mut out = kept;
    for m in extra {
        if !out.iter().any(|k| k.overlaps(&m)) {
            out.push(m);
        }
    }
    out.sort_by(|a, b| a.start.cmp(&b.start).then(a.end.cmp(&b.end)));
    out
}
