//! Independent oracles shared by the core integration tests and the
//! acceptance suite. Nothing here calls the code it checks except to obtain
//! the output being compared.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cyents::annotations::AnnotationSet;
use cyents::eval::ConfusionCounts;
use cyents::mention::{Mention, Provenance};
use cyents::ner::{decode, LabelSet};
use cyents::rules::{compile_gazetteer, match_gazetteer, match_patterns};
use cyents::text::{Document, TilingParams};

// ---------------------------------------------------------------- regexes

pub struct RegexItem {
    pub line: usize,
    pub label: String,
    pub sentence: String,
    pub expected: Vec<String>,
}

pub fn load_regex_items(fixtures: &Path) -> Vec<RegexItem> {
    let raw = fs::read_to_string(fixtures.join("rules/regex_items.tsv")).expect("regex fixture");
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
        .map(|(i, l)| {
            let cols: Vec<&str> = l.split('\t').collect();
            assert_eq!(cols.len(), 3, "line {}", i + 1);
            let expected = if cols[2].is_empty() { vec![] } else { cols[2].split(" | ").map(str::to_string).collect() };
            RegexItem { line: i + 1, label: cols[0].into(), sentence: cols[1].into(), expected }
        })
        .collect()
}

/// Surfaces of the item's label found in its sentence, compared as a multiset.
pub fn check_regex_item(item: &RegexItem) -> Result<(), String> {
    let doc = Document::from_raw("t", &item.sentence);
    let mut got: Vec<String> = match_patterns(&doc)
        .into_iter()
        .filter(|m| m.label == item.label)
        .map(|m| doc.slice(m.start, m.end).to_string())
        .collect();
    let mut want = item.expected.clone();
    got.sort();
    want.sort();
    if got == want {
        Ok(())
    } else {
        Err(format!("line {} [{}] {:?}: got {:?}, want {:?}", item.line, item.label, item.sentence, got, want))
    }
}

// ---------------------------------------------------------------- gazetteers

const GAZ_VOCAB: &[&str] = &[
    "windows", "linux", "os", "server", "sql", "injection", "cross", "site", "scripting", "java", "script", "c", "++",
    "c#", "smb", "dns", "over", "https", "tls", "mac", "ölfeld", "straße", "x86", "phishing", "spear", "v2",
];
const FILLER: &[&str] = &["the", "attackers", "used", "then", "a", "new", "on", "and", "against", "hosts", "via"];

fn fold(s: &str) -> String {
    s.split_whitespace()
        .map(|w| {
            w.chars()
                .map(|c| {
                    let l: Vec<char> = c.to_lowercase().collect();
                    if l.len() == 1 {
                        l[0]
                    } else {
                        c
                    }
                })
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_case(rng: &mut ChaCha8Rng, w: &str) -> String {
    match rng.gen_range(0..4) {
        0 => w.to_uppercase(),
        1 => {
            let mut cs = w.chars();
            cs.next().map(|f| f.to_uppercase().chain(cs).collect()).unwrap_or_default()
        }
        _ => w.to_string(),
    }
}

/// Brute force: every token-aligned substring, folded, looked up in the
/// folded entry set; then greedy leftmost-longest.
pub fn gazetteer_oracle(entries: &[String], doc: &Document) -> Vec<(usize, usize)> {
    let set: BTreeSet<String> = entries.iter().map(|e| fold(e)).filter(|e| !e.is_empty()).collect();
    let toks = doc.tokens();
    let mut cands = Vec::new();
    for i in 0..toks.len() {
        for j in i..toks.len() {
            let s = doc.slice(toks[i].start, toks[j].end);
            if s.chars().count() > 64 {
                break;
            }
            if set.contains(&fold(s)) {
                cands.push((toks[i].start, toks[j].end));
            }
        }
    }
    cands.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut out: Vec<(usize, usize)> = Vec::new();
    for c in cands {
        if out.last().map_or(true, |l| c.0 >= l.1) {
            out.push(c);
        }
    }
    out
}

/// One random document of at most `max_tokens` words plus two random
/// gazetteers; compares matcher and oracle for each.
pub fn check_gazetteer_case(seed: u64, max_tokens: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries_by_type = Vec::new();
    for label in ["Operating_System", "Attack_Type"] {
        let n = rng.gen_range(3..20);
        let entries: Vec<String> = (0..n)
            .map(|_| {
                let k = rng.gen_range(1..=3);
                (0..k)
                    .map(|_| {
                        let w = *GAZ_VOCAB.choose(&mut rng).unwrap();
                        random_case(&mut rng, w)
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        entries_by_type.push((label, entries));
    }
    let n_words = rng.gen_range(1..=max_tokens);
    let mut text = String::new();
    for i in 0..n_words {
        if i > 0 {
            text.push_str(if rng.gen_bool(0.1) { "  " } else { " " });
        }
        let w = if rng.gen_bool(0.6) { *GAZ_VOCAB.choose(&mut rng).unwrap() } else { *FILLER.choose(&mut rng).unwrap() };
        text.push_str(&random_case(&mut rng, w));
        match rng.gen_range(0..20) {
            0 => text.push('.'),
            1 => text.push(','),
            2 => text.push_str("-based"),
            _ => {}
        }
    }
    let doc = Document::new("g", text, None, &TilingParams::default()).map_err(|e| e.to_string())?;
    let mut total = 0;
    for (label, entries) in &entries_by_type {
        let gaz = compile_gazetteer(label, entries).map_err(|e| e.to_string())?;
        let got: Vec<(usize, usize)> = match_gazetteer(&gaz, &doc).iter().map(|m| (m.start, m.end)).collect();
        let want = gazetteer_oracle(entries, &doc);
        if got != want {
            return Err(format!("seed {seed} {label}: got {got:?}, want {want:?}"));
        }
        total += want.len();
    }
    Ok(total)
}

// ---------------------------------------------------------------- agreement

fn filler_set(annotator: &str, doc: &str, specs: &[(usize, &str)]) -> AnnotationSet {
    let mut s = AnnotationSet::new(annotator);
    s.insert(doc, specs.iter().map(|&(k, l)| Mention::new(10 * k, 10 * k + 4, l, Provenance::Human)).collect());
    s
}

/// One annotator pair: `shared` identical mentions, then `only_a` and `only_b`
/// mentions at disjoint slots (so they never coincide).
pub fn iaa_group(doc: &str, shared: usize, only_a: usize, only_b: usize) -> (AnnotationSet, AnnotationSet) {
    let labels = ["Malware_Name", "Threat_Actor", "Software_Name", "Port"];
    let mut a: Vec<(usize, &str)> = (0..shared).map(|k| (k, labels[k % 4])).collect();
    let mut b = a.clone();
    a.extend((0..only_a).map(|k| (shared + k, labels[k % 4])));
    b.extend((0..only_b).map(|k| (shared + only_a + k, labels[(k + 1) % 4])));
    (filler_set("a", doc, &a), filler_set("b", doc, &b))
}

/// Three annotator groups whose per-group maxima sum to 1755 and whose
/// intersections sum to 781: (shared, only_a, only_b) per group.
pub const STUDY_GROUPS: [(usize, usize, usize); 3] = [(300, 400, 350), (281, 319, 339), (200, 235, 200)];

pub fn study_expected() -> (usize, usize) {
    let total_max = STUDY_GROUPS.iter().map(|&(s, a, b)| (s + a).max(s + b)).sum();
    let accepted = STUDY_GROUPS.iter().map(|&(s, _, _)| s).sum();
    (total_max, accepted)
}

// ---------------------------------------------------------------- evaluation

/// Maximum bipartite matching between gold and predicted mentions of one
/// document, edges only between identical (start, end, label).
fn max_matching(gold: &[Mention], pred: &[Mention]) -> Vec<Option<usize>> {
    fn augment(
        g: usize,
        gold: &[Mention],
        pred: &[Mention],
        seen: &mut Vec<bool>,
        owner: &mut Vec<Option<usize>>,
    ) -> bool {
        for p in 0..pred.len() {
            let m = &pred[p];
            if seen[p] || m.start != gold[g].start || m.end != gold[g].end || m.label != gold[g].label {
                continue;
            }
            seen[p] = true;
            if owner[p].is_none() || augment(owner[p].unwrap(), gold, pred, seen, owner) {
                owner[p] = Some(g);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; pred.len()];
    for g in 0..gold.len() {
        let mut seen = vec![false; pred.len()];
        augment(g, gold, pred, &mut seen, &mut owner);
    }
    owner
}

/// Per-type (tp, fp, fn) from a maximum matching.
pub fn matching_counts(gold: &AnnotationSet, pred: &AnnotationSet) -> BTreeMap<String, (usize, usize, usize)> {
    let mut out: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for d in gold.doc_ids() {
        let (g, p) = (gold.mentions(d), pred.mentions(d));
        let owner = max_matching(g, p);
        let mut matched_gold = vec![false; g.len()];
        for (pi, o) in owner.iter().enumerate() {
            match o {
                Some(gi) => {
                    matched_gold[*gi] = true;
                    out.entry(p[pi].label.clone()).or_default().0 += 1;
                }
                None => out.entry(p[pi].label.clone()).or_default().1 += 1,
            }
        }
        for (gi, hit) in matched_gold.iter().enumerate() {
            if !hit {
                out.entry(g[gi].label.clone()).or_default().2 += 1;
            }
        }
    }
    out
}

pub fn confusion_as_tuples(c: &ConfusionCounts) -> BTreeMap<String, (usize, usize, usize)> {
    c.per_type.iter().filter(|(_, v)| v.tp + v.fp + v.fn_ > 0).map(|(k, v)| (k.clone(), (v.tp, v.fp, v.fn_))).collect()
}

/// Random gold and predicted sets over the same documents, with duplicates
/// and near-miss boundaries.
pub fn random_eval_pair(seed: u64) -> (AnnotationSet, AnnotationSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = ["Malware_Name", "Threat_Actor", "Port"];
    let (mut gold, mut pred) = (AnnotationSet::new("gold"), AnnotationSet::new("pred"));
    for d in 0..rng.gen_range(1..4) {
        let doc = format!("d{d}");
        let mut g = Vec::new();
        for _ in 0..rng.gen_range(0..8) {
            let s = rng.gen_range(0..20);
            g.push(Mention::new(s, s + rng.gen_range(1..4), labels[rng.gen_range(0..3)], Provenance::Human));
        }
        let mut p = Vec::new();
        for m in &g {
            match rng.gen_range(0..5) {
                0 => {}
                1 => p.push(Mention::new(m.start, m.end + 1, m.label.clone(), Provenance::Model)),
                2 => {
                    p.push(Mention::new(m.start, m.end, m.label.clone(), Provenance::Model));
                    p.push(Mention::new(m.start, m.end, m.label.clone(), Provenance::Model));
                }
                _ => p.push(Mention::new(m.start, m.end, m.label.clone(), Provenance::Model)),
            }
        }
        for _ in 0..rng.gen_range(0..3) {
            let s = rng.gen_range(0..20);
            p.push(Mention::new(s, s + 2, labels[rng.gen_range(0..3)], Provenance::Model));
        }
        gold.insert(doc.clone(), g);
        pred.insert(doc, p);
    }
    (gold, pred)
}

/// Per-type rows as printed in the published per-type score table:
/// (type, precision, recall, F-score), percentages.
pub const PUBLISHED_PER_TYPE: [(&str, f64, f64, f64); 11] = [
    ("Filename", 50.00, 40.00, 44.44),
    ("Malware_Name", 60.00, 84.00, 70.00),
    ("Vulnerability", 57.14, 100.00, 72.73),
    ("Operating_System", 71.43, 71.43, 71.43),
    ("Software_Name", 90.00, 69.23, 78.26),
    ("Version_Tag", 25.00, 33.33, 28.57),
    ("Filepath", 0.00, 0.00, 0.00),
    ("Protocol", 33.33, 10.00, 15.48),
    ("Threat_Actor", 100.00, 100.00, 100.00),
    ("Campaign", 50.00, 33.33, 40.00),
    ("Malware_Type", 0.00, 0.00, 0.00),
];

/// The Protocol row's printed F-score is not the harmonic mean of its
/// printed P and R (that gives 15.38), so it is exempt from the check.
pub const HARMONIC_EXEMPT: &str = "Protocol";

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

// ---------------------------------------------------------------- decoding

/// Random logits through softmax and `decode`; checks that spans are
/// sorted, non-overlapping, in bounds and of a known type.
pub fn check_decode_case(rng: &mut ChaCha8Rng, labels: &LabelSet) -> Result<usize, String> {
    let n = rng.gen_range(0..40);
    let l = labels.len();
    let scale = [0.5, 2.0, 8.0][rng.gen_range(0..3)];
    let probs: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..l).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
            let mx = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - mx).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let spans = decode(&probs, labels);
    let mut prev_end = 0;
    for s in &spans {
        if s.start >= s.end || s.end > n || s.start < prev_end {
            return Err(format!("bad span {s:?} after end {prev_end} (n={n})"));
        }
        if s.type_index >= labels.types().len() {
            return Err(format!("unknown type index {}", s.type_index));
        }
        if !(0.0..=1.0).contains(&s.score) {
            return Err(format!("score out of range {}", s.score));
        }
        prev_end = s.end;
    }
    Ok(spans.len())
}
