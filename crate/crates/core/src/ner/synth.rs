//! Templated threat-report sentences for exercising the tagger.
//!
//! Each sentence is its own document. Names are built from invented
//! syllable stems; the training and held-out splits draw stems from disjoint
//! pools, so held-out names are never seen in training.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotations::AnnotationSet;
use crate::mention::{Mention, Provenance};
use crate::text::{Corpus, Document};

pub const TYPES: [&str; 4] = ["Threat_Actor", "Malware_Name", "Software_Name", "Campaign"];

const SYLLABLES: [&str; 24] = [
    "kar", "vel", "dro", "min", "tas", "zor", "qui", "ben", "lux", "nar", "fel", "ost", "rim", "gav", "yul", "pex",
    "tor", "sil", "mak", "dun", "hra", "cel", "vom", "jin",
];

const TEMPLATES: [&str; 14] = [
    "{A} used {M} against {t} in {mo}.",
    "The {M} backdoor was deployed by {A} during {C}.",
    "{A} exploited a flaw in {S} to deliver {M}.",
    "Researchers attributed {C} to {A}.",
    "{M} abuses {S} to persist on infected hosts.",
    "During {C}, {A} targeted {t} in {ct}.",
    "Analysts observed {M} spreading through {S} plugins.",
    "Users of {S} were hit by {M} in {mo}.",
    "{C} relied on {M} to steal credentials from {t}.",
    "Security vendors linked {A} to {M} and {C}.",
    "A patched version of {S} blocks {M}.",
    "{A} has been active since {y} and favours {M}.",
    "Investigators found no link between {C} and {A}.",
    "The report on {C} names {S} as the entry point.",
];

const TARGETS: [&str; 6] = ["banks", "hospitals", "energy firms", "universities", "telecom operators", "government agencies"];
const MONTHS: [&str; 6] = ["January", "March", "May", "July", "September", "November"];
const COUNTRIES: [&str; 5] = ["Ukraine", "Germany", "Brazil", "Japan", "Canada"];
const ACTOR_SUFFIX: [&str; 7] = ["Bear", "Panda", "Spider", "Kitten", "Tiger", "Group", "Team"];
const PRODUCT_SUFFIX: [&str; 6] = ["Server", "Office", "Reader", "Gateway", "Studio", "Manager"];

/// Documents and gold spans for one split.
#[derive(Debug, Clone)]
pub struct SynthSplit {
    pub docs: Corpus,
    pub gold: AnnotationSet,
    /// every name stem used in this split
    pub stems: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub train: SynthSplit,
    pub heldout: SynthSplit,
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

fn stem_pool(rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut pool: Vec<String> = SYLLABLES
        .iter()
        .flat_map(|a| SYLLABLES.iter().filter(move |b| *b != a).map(move |b| capitalise(&format!("{a}{b}"))))
        .collect();
    pool.shuffle(rng);
    pool
}

fn entity(kind: char, stems: &[String], rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> (String, &'static str) {
    let stem = stems.choose(rng).expect("non-empty stem pool").clone();
    used.insert(stem.clone());
    match kind {
        'A' => (format!("{stem} {}", ACTOR_SUFFIX.choose(rng).unwrap()), "Threat_Actor"),
        'M' => (stem, "Malware_Name"),
        'S' => {
            if rng.gen_bool(0.7) {
                (format!("{stem} {}", PRODUCT_SUFFIX.choose(rng).unwrap()), "Software_Name")
            } else {
                (stem, "Software_Name")
            }
        }
        'C' => (format!("Operation {stem}"), "Campaign"),
        _ => unreachable!("unknown slot"),
    }
}

fn sentence(stems: &[String], rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> (String, Vec<Mention>) {
    let template = TEMPLATES.choose(rng).unwrap();
    let mut text = String::new();
    let mut chars = 0;
    let mut mentions = Vec::new();
    let mut rest = *template;
    while let Some(open) = rest.find('{') {
        let lit = &rest[..open];
        text.push_str(lit);
        chars += lit.chars().count();
        let close = open + rest[open..].find('}').expect("closed slot");
        let slot = &rest[open + 1..close];
        let filler = match slot {
            "t" => TARGETS.choose(rng).unwrap().to_string(),
            "mo" => MONTHS.choose(rng).unwrap().to_string(),
            "ct" => COUNTRIES.choose(rng).unwrap().to_string(),
            "y" => rng.gen_range(2009..2023).to_string(),
            k => {
                let (name, label) = entity(k.chars().next().unwrap(), stems, rng, used);
                let n = name.chars().count();
                mentions.push(Mention::new(chars, chars + n, label, Provenance::Human));
                name
            }
        };
        chars += filler.chars().count();
        text.push_str(&filler);
        rest = &rest[close + 1..];
    }
    text.push_str(rest);
    (text, mentions)
}

fn split(name: &str, n: usize, stems: &[String], rng: &mut ChaCha8Rng) -> SynthSplit {
    let mut docs = Corpus::new();
    let mut gold = AnnotationSet::new("synthetic");
    let mut used = BTreeSet::new();
    for i in 0..n {
        let (text, mentions) = sentence(stems, rng, &mut used);
        let id = format!("synth-{name}-{i:04}");
        docs.insert(id.clone(), Document::from_raw(id.clone(), &text));
        gold.insert(id, mentions);
    }
    SynthSplit { docs, gold, stems: used }
}

/// Generates `n_train` training and `n_heldout` held-out sentences.
pub fn generate(seed: u64, n_train: usize, n_heldout: usize) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = stem_pool(&mut rng);
    let (train_stems, heldout_stems) = pool.split_at(pool.len() / 2);
    let train = split("train", n_train, train_stems, &mut rng);
    let heldout = split("heldout", n_heldout, heldout_stems, &mut rng);
    SynthCorpus { train, heldout }
}
