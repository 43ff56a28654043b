//! Annotation sets, inter-annotator agreement and intersection merging.
//!
//! Agreement is exact: two mentions agree only when document, start, end and
//! label are all identical. `Windows` vs `Windows OS`, or `RunGame` vs
//! `RunGame()`, count as disagreements.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mention::{Mention, Provenance};
use crate::schema::SchemaVersion;
use crate::text::Corpus;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: span {start}..{end} is out of bounds for document `{doc_id}`")]
    SpanOutOfBounds { line: usize, doc_id: String, start: usize, end: usize },
    #[error("line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: unknown document `{doc_id}`")]
    UnknownDoc { line: usize, doc_id: String },
    #[error("line {line}: spans {a:?} and {b:?} overlap")]
    Overlap { line: usize, a: (usize, usize), b: (usize, usize) },
    #[error("annotation sets cover different documents")]
    DocMismatch,
    #[error("need at least two annotation sets, got {0}")]
    NotEnoughSets(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One annotator's mentions per document. Mentions are kept sorted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationSet {
    pub annotator_id: String,
    entries: BTreeMap<String, Vec<Mention>>,
}

/// A JSONL line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationLine {
    pub doc_id: String,
    pub annotator: String,
    pub spans: Vec<Mention>,
}

fn sort_mentions(ms: &mut [Mention]) {
    ms.sort_by(|a, b| a.start.cmp(&b.start).then(a.end.cmp(&b.end)).then_with(|| a.label.cmp(&b.label)));
}

impl AnnotationSet {
    pub fn new(annotator_id: impl Into<String>) -> Self {
        AnnotationSet { annotator_id: annotator_id.into(), entries: BTreeMap::new() }
    }

    /// Replaces the mentions of `doc_id`.
    pub fn insert(&mut self, doc_id: impl Into<String>, mut mentions: Vec<Mention>) {
        sort_mentions(&mut mentions);
        self.entries.insert(doc_id.into(), mentions);
    }

    pub fn remove(&mut self, doc_id: &str) -> Option<Vec<Mention>> {
        self.entries.remove(doc_id)
    }

    /// Mentions for a document, empty if the document is absent.
    pub fn mentions(&self, doc_id: &str) -> &[Mention] {
        self.entries.get(doc_id).map_or(&[], Vec::as_slice)
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.entries.contains_key(doc_id)
    }

    pub fn doc_ids(&self) -> BTreeSet<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Mention])> {
        self.entries.iter().map(|(d, m)| (d.as_str(), m.as_slice()))
    }

    /// Total number of mentions.
    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_docs(&self) -> usize {
        self.entries.len()
    }

    /// The same set restricted to `doc_ids`.
    pub fn restrict<'a>(&self, doc_ids: impl IntoIterator<Item = &'a str>) -> AnnotationSet {
        let mut out = AnnotationSet::new(self.annotator_id.clone());
        for d in doc_ids {
            if let Some(ms) = self.entries.get(d) {
                out.entries.insert(d.to_string(), ms.clone());
            }
        }
        out
    }

    /// Keeps only mentions whose label passes `keep`.
    pub fn filter_labels(&self, keep: impl Fn(&str) -> bool) -> AnnotationSet {
        let mut out = AnnotationSet::new(self.annotator_id.clone());
        for (d, ms) in &self.entries {
            out.entries
                .insert(d.clone(), ms.iter().filter(|m| keep(&m.label)).cloned().collect());
        }
        out
    }

    /// Checks bounds, labels and overlap of one document's spans. `line` is
    /// used for error reporting.
    pub fn validate_doc(
        doc_id: &str,
        mentions: &[Mention],
        corpus: Option<&Corpus>,
        schema: &SchemaVersion,
        line: usize,
    ) -> Result<(), AnnotationError> {
        let len = match corpus {
            Some(c) => Some(
                c.get(doc_id)
                    .ok_or_else(|| AnnotationError::UnknownDoc { line, doc_id: doc_id.to_string() })?
                    .char_len(),
            ),
            None => None,
        };
        let mut sorted: Vec<&Mention> = mentions.iter().collect();
        sorted.sort_by_key(|m| (m.start, m.end));
        for m in &sorted {
            if m.start >= m.end || len.map_or(false, |l| m.end > l) {
                return Err(AnnotationError::SpanOutOfBounds {
                    line,
                    doc_id: doc_id.to_string(),
                    start: m.start,
                    end: m.end,
                });
            }
            if !schema.contains(&m.label) {
                return Err(AnnotationError::UnknownLabel { line, label: m.label.clone() });
            }
        }
        for w in sorted.windows(2) {
            if w[0].overlaps(w[1]) {
                return Err(AnnotationError::Overlap {
                    line,
                    a: (w[0].start, w[0].end),
                    b: (w[1].start, w[1].end),
                });
            }
        }
        Ok(())
    }

    pub fn validate(&self, corpus: Option<&Corpus>, schema: &SchemaVersion) -> Result<(), AnnotationError> {
        for (i, (d, ms)) in self.entries.iter().enumerate() {
            Self::validate_doc(d, ms, corpus, schema, i + 1)?;
        }
        Ok(())
    }

    pub fn to_lines(&self) -> Vec<AnnotationLine> {
        self.entries
            .iter()
            .map(|(d, ms)| AnnotationLine {
                doc_id: d.clone(),
                annotator: self.annotator_id.clone(),
                spans: ms.clone(),
            })
            .collect()
    }

    /// Parses and validates JSONL. Without a corpus only labels, span order
    /// and overlap are checked.
    pub fn read_jsonl(
        reader: impl BufRead,
        corpus: Option<&Corpus>,
        schema: &SchemaVersion,
    ) -> Result<AnnotationSet, AnnotationError> {
        let mut set: Option<AnnotationSet> = None;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: AnnotationLine = serde_json::from_str(&line)
                .map_err(|e| AnnotationError::Parse { line: line_no, message: e.to_string() })?;
            Self::validate_doc(&parsed.doc_id, &parsed.spans, corpus, schema, line_no)?;
            let set = set.get_or_insert_with(|| AnnotationSet::new(parsed.annotator.clone()));
            if set.annotator_id != parsed.annotator {
                return Err(AnnotationError::Parse {
                    line: line_no,
                    message: format!(
                        "annotator `{}` differs from `{}` on earlier lines",
                        parsed.annotator, set.annotator_id
                    ),
                });
            }
            if set.entries.contains_key(&parsed.doc_id) {
                return Err(AnnotationError::Parse {
                    line: line_no,
                    message: format!("document `{}` appears twice", parsed.doc_id),
                });
            }
            set.insert(parsed.doc_id, parsed.spans);
        }
        Ok(set.unwrap_or_default())
    }

    pub fn write_jsonl(&self, mut writer: impl Write) -> std::io::Result<()> {
        for line in self.to_lines() {
            serde_json::to_writer(&mut writer, &line)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()
    }
}

pub fn load_jsonl(
    path: &Path,
    corpus: Option<&Corpus>,
    schema: &SchemaVersion,
) -> Result<AnnotationSet, AnnotationError> {
    let mut set = AnnotationSet::read_jsonl(BufReader::new(File::open(path)?), corpus, schema)?;
    if set.annotator_id.is_empty() {
        if let Some(stem) = path.file_stem() {
            set.annotator_id = stem.to_string_lossy().into_owned();
        }
    }
    Ok(set)
}

/// Writes through a temporary file and renames it into place.
pub fn save_jsonl(set: &AnnotationSet, path: &Path) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("jsonl.tmp");
    {
        let file = File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        set.write_jsonl(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    fs::rename(tmp, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TypeAgreement {
    pub a_count: usize,
    pub b_count: usize,
    pub agreed: usize,
}

/// Agreement between two annotators over the same documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IAAReport {
    pub pair: (String, String),
    pub count_a: usize,
    pub count_b: usize,
    /// `max(count_a, count_b)`
    pub total_max: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
    pub pairwise_f1: f64,
    pub per_type_agreement: BTreeMap<String, TypeAgreement>,
}

type Key<'a> = (&'a str, usize, usize, &'a str);

fn key_counts(set: &AnnotationSet) -> BTreeMap<Key<'_>, usize> {
    let mut counts = BTreeMap::new();
    for (d, ms) in set.iter() {
        for m in ms {
            *counts.entry((d, m.start, m.end, m.label.as_str())).or_insert(0) += 1;
        }
    }
    counts
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Exact-match agreement. Rates use the 0/0 = 0 convention.
pub fn agreement(a: &AnnotationSet, b: &AnnotationSet) -> Result<IAAReport, AnnotationError> {
    if a.doc_ids() != b.doc_ids() {
        return Err(AnnotationError::DocMismatch);
    }
    let ca = key_counts(a);
    let cb = key_counts(b);
    let mut per_type: BTreeMap<String, TypeAgreement> = BTreeMap::new();
    for (k, n) in &ca {
        per_type.entry(k.3.to_string()).or_default().a_count += n;
    }
    for (k, n) in &cb {
        per_type.entry(k.3.to_string()).or_default().b_count += n;
    }
    let mut accepted = 0;
    for (k, n) in &ca {
        if let Some(m) = cb.get(k) {
            let both = (*n).min(*m);
            accepted += both;
            per_type.get_mut(k.3).unwrap().agreed += both;
        }
    }
    let (count_a, count_b) = (a.len(), b.len());
    let total_max = count_a.max(count_b);
    Ok(IAAReport {
        pair: (a.annotator_id.clone(), b.annotator_id.clone()),
        count_a,
        count_b,
        total_max,
        accepted,
        acceptance_rate: ratio(accepted, total_max),
        pairwise_f1: ratio(2 * accepted, count_a + count_b),
        per_type_agreement: per_type,
    })
}

/// Totals over several annotator groups: per-group maxima and acceptances summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub groups: usize,
    pub total_max: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
}

pub fn summarize(reports: &[IAAReport]) -> StudySummary {
    let total_max = reports.iter().map(|r| r.total_max).sum();
    let accepted = reports.iter().map(|r| r.accepted).sum();
    StudySummary { groups: reports.len(), total_max, accepted, acceptance_rate: ratio(accepted, total_max) }
}

/// Mentions present, with identical span and label, in every set.
/// Accepted mentions become human provenance with full score.
pub fn merge_group(sets: &[AnnotationSet]) -> Result<AnnotationSet, AnnotationError> {
    if sets.len() < 2 {
        return Err(AnnotationError::NotEnoughSets(sets.len()));
    }
    let docs = sets[0].doc_ids();
    if sets[1..].iter().any(|s| s.doc_ids() != docs) {
        return Err(AnnotationError::DocMismatch);
    }
    let counts: Vec<_> = sets.iter().map(key_counts).collect();
    let mut out = AnnotationSet::new("accepted");
    for d in docs {
        out.entries.insert(d.to_string(), Vec::new());
    }
    for (k, n) in &counts[0] {
        let common = counts[1..].iter().map(|c| c.get(k).copied().unwrap_or(0)).fold(*n, usize::min);
        let ms = out.entries.get_mut(k.0).unwrap();
        for _ in 0..common {
            ms.push(Mention::new(k.1, k.2, k.3, Provenance::Human));
        }
    }
    for ms in out.entries.values_mut() {
        sort_mentions(ms);
    }
    Ok(out)
}

/// Mention counts per label.
pub fn label_distribution(set: &AnnotationSet) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for (_, ms) in set.iter() {
        for m in ms {
            *out.entry(m.label.clone()).or_insert(0) += 1;
        }
    }
    out
}

/// Round-one label counts reported for the original study, for side-by-side
/// comparison with a local distribution.
pub fn reference_round1_distribution() -> BTreeMap<String, usize> {
    serde_json::from_str(include_str!("../data/reference/round1_label_distribution.json"))
        .expect("reference distribution parses")
}
