use super::{LabelSet, Tag};

/// A decoded entity over token indices `start..end`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
    pub type_index: usize,
    pub score: f64,
}

/// Turns a possibly ill-formed tag sequence into spans `(start, end, type)`.
///
/// Outside an entity, `I-t` opens one and `L-t` becomes `U-t`. Inside an
/// entity of type `t`: `I-t` continues, `L-t` closes it; `O` closes it before
/// the current token; `B-*` and `I-u` (u ≠ t) close it and open a new one;
/// `L-u` and `U-*` close it and emit a single-token span. An entity still open
/// at the end runs to the last token. So `B-X L-Y` yields `U-X U-Y`.
pub fn repair(tags: &[Tag]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<(usize, usize)> = None; // (type, start)
    for (i, &tag) in tags.iter().enumerate() {
        match (open, tag) {
            (Some((t, _)), Tag::I(u)) if t == u => {}
            (Some((t, s)), Tag::L(u)) if t == u => {
                out.push((s, i + 1, t));
                open = None;
            }
            (Some((t, s)), _) => {
                out.push((s, i, t));
                open = None;
                start_fresh(tag, i, &mut open, &mut out);
            }
            (None, _) => start_fresh(tag, i, &mut open, &mut out),
        }
    }
    if let Some((t, s)) = open {
        out.push((s, tags.len(), t));
    }
    out
}

fn start_fresh(tag: Tag, i: usize, open: &mut Option<(usize, usize)>, out: &mut Vec<(usize, usize, usize)>) {
    match tag {
        Tag::O => {}
        Tag::B(t) | Tag::I(t) => *open = Some((t, i)),
        Tag::L(t) | Tag::U(t) => out.push((i, i + 1, t)),
    }
}

fn argmax(row: &[f64]) -> usize {
    // strict comparison keeps the lowest index on ties, so O wins
    let mut best = 0;
    for (j, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = j;
        }
    }
    best
}

/// Greedy decoding of per-token label probabilities (rows of length
/// `labels.len()`), followed by [`repair`]. Span scores are the mean of the
/// winning probability over the span's tokens.
pub fn decode(probs: &[Vec<f64>], labels: &LabelSet) -> Vec<TokenSpan> {
    let best: Vec<usize> = probs.iter().map(|r| argmax(r)).collect();
    let tags: Vec<Tag> = best.iter().map(|&j| labels.tag(j)).collect();
    repair(&tags)
        .into_iter()
        .map(|(s, e, t)| {
            let score = (s..e).map(|i| probs[i][best[i]]).sum::<f64>() / (e - s) as f64;
            TokenSpan { start: s, end: e, type_index: t, score }
        })
        .collect()
}
