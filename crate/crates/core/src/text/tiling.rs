//! TextTiling block-comparison segmentation.
//!
//! Word tokens are grouped into pseudo-sentences of `window_w` tokens. Each
//! gap with a full block of `block_k` windows on both sides is scored by the
//! cosine similarity of the two blocks, smoothed once with a width-3 moving
//! average. An interior local minimum gets a depth score from hill-climbing
//! to the nearest peak on each side; gaps deeper than
//! `mean - multiplier * stddev` become boundaries, snapped to the nearest
//! sentence end.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tokenize::Token;

/// Depths at or below this are flat ground, not valleys.
const MIN_DEPTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TilingParams {
    pub window_w: usize,
    pub block_k: usize,
    pub depth_cutoff_multiplier: f64,
}

impl Default for TilingParams {
    fn default() -> Self {
        Self { window_w: 20, block_k: 6, depth_cutoff_multiplier: 0.5 }
    }
}

/// Intermediate scores, exposed for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct TilingTrace {
    /// Gap index of `gap_scores[0]`; gap `i` sits between windows `i` and `i + 1`.
    pub first_gap: usize,
    pub gap_scores: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub depths: Vec<f64>,
    pub cutoff: f64,
    /// Sentence indices where a new paragraph starts (never 0).
    pub boundaries: Vec<usize>,
}

type Bag = BTreeMap<String, f64>;

fn add_into(acc: &mut Bag, other: &Bag) {
    for (w, c) in other {
        *acc.entry(w.clone()).or_default() += c;
    }
}

fn cosine(a: &Bag, b: &Bag) -> f64 {
    let dot: f64 = a.iter().filter_map(|(w, x)| b.get(w).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn smooth(scores: &[f64]) -> Vec<f64> {
    (0..scores.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 2).min(scores.len());
            scores[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn depth_scores(s: &[f64]) -> Vec<f64> {
    let n = s.len();
    (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n || s[i] > s[i - 1] || s[i] > s[i + 1] {
                return 0.0;
            }
            let mut lpeak = s[i];
            for &v in s[..i].iter().rev() {
                if v >= lpeak {
                    lpeak = v;
                } else {
                    break;
                }
            }
            let mut rpeak = s[i];
            for &v in &s[i + 1..] {
                if v >= rpeak {
                    rpeak = v;
                } else {
                    break;
                }
            }
            (lpeak - s[i]) + (rpeak - s[i])
        })
        .collect()
}

/// Segments sentences into topical paragraphs.
///
/// `sentence_tokens[i]` holds the tokens of sentence `i`. Returns half-open
/// sentence-index ranges that partition `0..sentence_tokens.len()`. Inputs
/// with fewer than `2 * block_k` windows come back as one paragraph.
pub fn segment(sentence_tokens: &[Vec<Token>], params: &TilingParams) -> Vec<(usize, usize)> {
    let n_sent = sentence_tokens.len();
    match trace(sentence_tokens, params) {
        Some(t) => boundaries_to_ranges(&t.boundaries, n_sent),
        None if n_sent == 0 => Vec::new(),
        None => vec![(0, n_sent)],
    }
}

pub(crate) fn boundaries_to_ranges(boundaries: &[usize], n_sent: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(boundaries.len() + 1);
    let mut start = 0;
    for &b in boundaries {
        out.push((start, b));
        start = b;
    }
    if n_sent > 0 {
        out.push((start, n_sent));
    }
    out
}

/// Runs the scoring stages; `None` for degenerate input.
pub fn trace(sentence_tokens: &[Vec<Token>], params: &TilingParams) -> Option<TilingTrace> {
    let w = params.window_w.max(1);
    let k = params.block_k.max(1);

    // (lowercased word, sentence index) in reading order
    let words: Vec<(String, usize)> = sentence_tokens
        .iter()
        .enumerate()
        .flat_map(|(si, toks)| {
            toks.iter()
                .filter(|t| t.is_word())
                .map(move |t| (t.surface.to_lowercase(), si))
        })
        .collect();
    let windows: Vec<Bag> = words
        .chunks(w)
        .map(|chunk| {
            let mut bag = Bag::new();
            for (word, _) in chunk {
                *bag.entry(word.clone()).or_default() += 1.0;
            }
            bag
        })
        .collect();
    let n = windows.len();
    if n < 2 * k || sentence_tokens.len() < 2 {
        return None;
    }

    let first_gap = k - 1;
    let gap_scores: Vec<f64> = (first_gap..=n - 1 - k)
        .map(|i| {
            let mut left = Bag::new();
            let mut right = Bag::new();
            for win in &windows[i + 1 - k..=i] {
                add_into(&mut left, win);
            }
            for win in &windows[i + 1..=i + k] {
                add_into(&mut right, win);
            }
            cosine(&left, &right)
        })
        .collect();
    let smoothed = smooth(&gap_scores);
    let depths = depth_scores(&smoothed);
    let mean = depths.iter().sum::<f64>() / depths.len() as f64;
    let var = depths.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / depths.len() as f64;
    let cutoff = mean - params.depth_cutoff_multiplier * var.sqrt();

    let mut boundaries = Vec::new();
    for (j, &d) in depths.iter().enumerate() {
        if d <= cutoff || d <= MIN_DEPTH {
            continue;
        }
        let pos = (first_gap + j + 1) * w; // first word after the gap
        let (before, after) = (words[pos - 1].1, words[pos].1);
        let boundary = if before != after {
            after
        } else {
            // snap inside sentence `before` to whichever end is nearer in words
            let s_start = words.iter().position(|(_, s)| *s == before).unwrap();
            let s_end = words.iter().rposition(|(_, s)| *s == before).unwrap() + 1;
            if pos - s_start < s_end - pos {
                before
            } else {
                before + 1
            }
        };
        if boundary > 0 && boundary < sentence_tokens.len() {
            boundaries.push(boundary);
        }
    }
    boundaries.sort_unstable();
    boundaries.dedup();
    Some(TilingTrace { first_gap, gap_scores, smoothed, depths, cutoff, boundaries })
}
