//! Documents, tokens, sentences and topical paragraphs.
//!
//! All offsets are Unicode scalar (char) counts, end-exclusive. Stored text
//! never contains `\n` or `\r`.

mod sentences;
mod tiling;
mod tokenize;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sentences::split_sentences;
pub use tiling::{segment as segment_sentences, trace as tiling_trace, TilingParams, TilingTrace};
pub use tokenize::{tokenize, Token};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("document `{0}` contains a newline character")]
    ContainsNewline(String),
    #[error("document `{doc_id}`: {reason}")]
    BadStructure { doc_id: String, reason: String },
}

/// Documents by id.
pub type Corpus = BTreeMap<String, Document>;

/// Collapses every whitespace run (newlines included) to one space and trims.
pub fn normalize_whitespace(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// An article with its sentence and paragraph structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DocumentRecord", into = "DocumentRecord")]
pub struct Document {
    pub doc_id: String,
    text: String,
    pub source_url: Option<String>,
    sentences: Vec<(usize, usize)>,
    paragraphs: Vec<(usize, usize)>,
    /// byte offset of every char, plus `text.len()` at the end
    char_bytes: Vec<usize>,
}

/// Wire form, one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
    pub sentences: Vec<(usize, usize)>,
    pub paragraphs: Vec<(usize, usize)>,
}

fn char_bytes(text: &str) -> Vec<usize> {
    text.char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .collect()
}

impl Document {
    /// Builds a document from text that is already newline-free, splitting
    /// sentences and segmenting paragraphs with `params`.
    pub fn new(
        doc_id: impl Into<String>,
        text: impl Into<String>,
        source_url: Option<String>,
        params: &TilingParams,
    ) -> Result<Self, TextError> {
        let doc_id = doc_id.into();
        let text = text.into();
        if text.contains(['\n', '\r']) {
            return Err(TextError::ContainsNewline(doc_id));
        }
        let tokens = tokenize(&text);
        let sentences = sentences::split_tokens(&tokens);
        let per_sentence = group_by_sentence(&tokens, &sentences);
        let paragraphs = tiling::segment(&per_sentence, params);
        Ok(Document { char_bytes: char_bytes(&text), doc_id, text, source_url, sentences, paragraphs })
    }

    /// Normalises whitespace in `raw` and builds the document with default tiling.
    pub fn from_raw(doc_id: impl Into<String>, raw: &str) -> Self {
        Self::new(doc_id, normalize_whitespace(raw), None, &TilingParams::default())
            .expect("normalised text has no newlines")
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn char_len(&self) -> usize {
        self.char_bytes.len() - 1
    }

    pub fn sentences(&self) -> &[(usize, usize)] {
        &self.sentences
    }

    pub fn paragraphs(&self) -> &[(usize, usize)] {
        &self.paragraphs
    }

    /// Substring by char offsets. Panics if out of bounds.
    pub fn slice(&self, start: usize, end: usize) -> &str {
        &self.text[self.char_bytes[start]..self.char_bytes[end]]
    }

    pub fn byte_offset(&self, char_offset: usize) -> usize {
        self.char_bytes[char_offset]
    }

    /// Char offset of a byte offset that lies on a char boundary.
    pub fn char_offset(&self, byte_offset: usize) -> usize {
        self.char_bytes
            .binary_search(&byte_offset)
            .expect("byte offset on a char boundary")
    }

    pub fn tokens(&self) -> Vec<Token> {
        tokenize(&self.text)
    }

    /// Tokens grouped by sentence.
    pub fn sentence_tokens(&self) -> Vec<Vec<Token>> {
        group_by_sentence(&self.tokens(), &self.sentences)
    }

    /// Index of the sentence containing char `offset`, if any.
    pub fn sentence_of(&self, offset: usize) -> Option<usize> {
        self.sentences.iter().position(|&(s, e)| s <= offset && offset < e)
    }

    /// Re-segments paragraphs with different tiling parameters.
    pub fn resegment(&mut self, params: &TilingParams) {
        self.paragraphs = tiling::segment(&self.sentence_tokens(), params);
    }

    /// Text of the first `n` paragraphs, as a new document with the same id.
    pub fn first_paragraphs(&self, n: usize) -> Document {
        let Some(&(_, last)) = self.paragraphs.get(n.min(self.paragraphs.len()).wrapping_sub(1)) else {
            return self.clone();
        };
        let end = self.sentences[last - 1].1;
        let mut doc = self.clone();
        doc.text = self.slice(0, end).to_string();
        doc.char_bytes = char_bytes(&doc.text);
        doc.sentences.truncate(last);
        doc.paragraphs.truncate(n);
        doc
    }
}

fn group_by_sentence(tokens: &[Token], sentences: &[(usize, usize)]) -> Vec<Vec<Token>> {
    let mut out = vec![Vec::new(); sentences.len()];
    let mut si = 0;
    for t in tokens {
        while si < sentences.len() && t.start >= sentences[si].1 {
            si += 1;
        }
        if si < sentences.len() && t.start >= sentences[si].0 {
            out[si].push(t.clone());
        }
    }
    out
}

impl From<Document> for DocumentRecord {
    fn from(d: Document) -> Self {
        DocumentRecord {
            doc_id: d.doc_id,
            text: d.text,
            source_url: d.source_url,
            sentences: d.sentences,
            paragraphs: d.paragraphs,
        }
    }
}

impl TryFrom<DocumentRecord> for Document {
    type Error = TextError;

    fn try_from(r: DocumentRecord) -> Result<Self, Self::Error> {
        let bad = |reason: &str| TextError::BadStructure { doc_id: r.doc_id.clone(), reason: reason.into() };
        if r.text.contains(['\n', '\r']) {
            return Err(TextError::ContainsNewline(r.doc_id));
        }
        let len = r.text.chars().count();
        let mut prev = 0;
        for &(s, e) in &r.sentences {
            if s < prev || s >= e || e > len {
                return Err(bad("sentence ranges must be sorted, non-empty, non-overlapping and in bounds"));
            }
            prev = e;
        }
        let mut next = 0;
        for &(i, j) in &r.paragraphs {
            if i != next || j <= i {
                return Err(bad("paragraphs must partition the sentences"));
            }
            next = j;
        }
        if next != r.sentences.len() {
            return Err(bad("paragraphs must partition the sentences"));
        }
        Ok(Document {
            char_bytes: char_bytes(&r.text),
            doc_id: r.doc_id,
            text: r.text,
            source_url: r.source_url,
            sentences: r.sentences,
            paragraphs: r.paragraphs,
        })
    }
}
