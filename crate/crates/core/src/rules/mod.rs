//! High-precision recognisers: format regexes and gazetteers.
//!
//! Regex and built-in matches win over gazetteer matches when they overlap,
//! because a format match is unambiguous.

mod gazetteer;

use std::ops::Range;

use thiserror::Error;

pub use gazetteer::{
    compile_gazetteer, load_gazetteers, match_gazetteer, normalize_term, parse_gazetteer_tsv,
    seed_gazetteers, write_seed_gazetteers, Gazetteer,
};

use crate::annotations::AnnotationSet;
use crate::mention::{leftmost_longest, merge_with_priority, Mention, Provenance};
use crate::patterns;
use crate::text::Document;

#[derive(Debug, Error)]
pub enum RulesError {
    #[error("gazetteer for `{0}` has no entries")]
    EmptyGazetteer(String),
    #[error("gazetteer type `{0}` is not in the schema")]
    UnknownType(String),
    #[error("{source_name}:{line}: {message}")]
    Parse { source_name: String, line: usize, message: String },
    #[error("could not build matcher: {0}")]
    Automaton(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn to_mentions<'a>(doc: &'a Document, ranges: Vec<Range<usize>>, label: &str) -> impl Iterator<Item = Mention> + 'a {
    let label = label.to_string();
    ranges.into_iter().map(move |r| {
        Mention::new(doc.char_offset(r.start), doc.char_offset(r.end), label.clone(), Provenance::Rule)
    })
}

/// Every regex and built-in match in the document. Matches of different
/// types may overlap (a URL can contain an IP address).
pub fn match_patterns(doc: &Document) -> Vec<Mention> {
    let text = doc.text();
    let v4 = patterns::ipv4(text);
    let ports = patterns::ports(text, &v4);
    let mut out: Vec<Mention> = Vec::new();
    out.extend(to_mentions(doc, v4, "IP_Address"));
    out.extend(to_mentions(doc, patterns::ipv6(text), "IP_Address"));
    out.extend(to_mentions(doc, patterns::hashes(text), "Hash"));
    out.extend(to_mentions(doc, ports, "Port"));
    out.extend(to_mentions(doc, patterns::cves(text), "CVE"));
    out.extend(to_mentions(doc, patterns::emails(text), "Email"));
    out.extend(to_mentions(doc, patterns::urls(text), "URL"));
    out.sort_by(|a, b| a.start.cmp(&b.start).then(a.end.cmp(&b.end)).then_with(|| a.label.cmp(&b.label)));
    out
}

/// Non-overlapping rule mentions for one document.
pub fn prepopulate_doc(doc: &Document, gazetteers: &[Gazetteer]) -> Vec<Mention> {
    let formats = leftmost_longest(match_patterns(doc));
    let terms = leftmost_longest(gazetteers.iter().flat_map(|g| match_gazetteer(g, doc)).collect());
    merge_with_priority(formats, terms)
}

/// Rule pre-annotation of a document collection, as annotator `rules`.
pub fn prepopulate<'a>(docs: impl IntoIterator<Item = &'a Document>, gazetteers: &[Gazetteer]) -> AnnotationSet {
    let mut set = AnnotationSet::new("rules");
    for doc in docs {
        set.insert(doc.doc_id.clone(), prepopulate_doc(doc, gazetteers));
    }
    set
}
