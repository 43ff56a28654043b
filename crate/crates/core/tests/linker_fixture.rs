use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use cyents::linker::{
    link_document, rank, CandidateSource, Decision, FixtureClient, LinkCandidate, LinkConfig, LinkError, LinkWeights,
};
use cyents::mention::{Mention, Provenance};
use cyents::text::Document;

fn fixtures() -> FixtureClient {
    FixtureClient::new(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/linker"))
}

const CONTEXT: &str = "Lazarus was behind the WannaCry attack";

#[test]
fn lazarus_links_to_the_hacker_group() {
    let cands = fixtures().search("Lazarus").unwrap();
    assert!(cands.len() >= 20);
    assert!(cands.iter().any(|c| c.qid == "Q19284445"));
    let cfg = LinkConfig::default();
    let r = rank("Lazarus", CONTEXT, &cands, &cfg.weights, &cfg.relevant_types);
    for c in r.ranked.iter().take(4) {
        eprintln!("{} {:.4} {:?}", c.candidate.qid, c.score, c.features);
    }
    assert_eq!(r.ranked[0].candidate.qid, "Q19284445");
    assert_eq!(r.decision, Decision::Linked("Q19284445".into()));
}

#[test]
fn empty_and_missing_fixtures() {
    assert!(fixtures().search("zzqqxx-nonexistent").unwrap().is_empty());
    assert!(matches!(fixtures().search("no such recording"), Err(LinkError::Client(_))));
}

#[test]
fn ranking_is_deterministic() {
    let cfg = LinkConfig::default();
    let mut cands = fixtures().search("Lazarus").unwrap();
    let a = rank("Lazarus", CONTEXT, &cands, &cfg.weights, &cfg.relevant_types);
    cands.reverse();
    let b = rank("Lazarus", CONTEXT, &cands, &cfg.weights, &cfg.relevant_types);
    let ids = |r: &cyents::linker::Ranking| r.ranked.iter().map(|c| c.candidate.qid.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&a), ids(&b));
    for w in a.ranked.windows(2) {
        assert!(w[0].score >= w[1].score);
    }
}

#[test]
fn score_is_monotone_in_prominence() {
    let cfg = LinkConfig::default();
    let cands = fixtures().search("Lazarus").unwrap();
    let target = cands.iter().position(|c| c.qid == "Q90000103").unwrap();
    let score_of = |cs: &[LinkCandidate]| {
        let r = rank("Lazarus", CONTEXT, cs, &cfg.weights, &cfg.relevant_types);
        r.ranked.iter().find(|c| c.candidate.qid == "Q90000103").unwrap().score
    };
    let mut prev = f64::NEG_INFINITY;
    // stays below the fixture maximum (70) so the normaliser is unchanged
    for p in [0, 1, 5, 19, 40, 69] {
        let mut cs = cands.clone();
        cs[target].prominence = p;
        let s = score_of(&cs);
        assert!(s > prev, "prominence {p}: {s} <= {prev}");
        prev = s;
    }
}

#[test]
fn string_match_alone_picks_an_exact_label() {
    let w = LinkWeights { w_match: 1.0, w_prom: 0.0, w_ctx: 0.0, w_type: 0.0, nil_threshold: 0.35 };
    let cands = fixtures().search("Lazarus").unwrap();
    let r = rank("Lazarus", CONTEXT, &cands, &w, &BTreeSet::new());
    let best = r.ranked.iter().map(|c| c.features.string_match).fold(0.0, f64::max);
    assert_eq!(r.ranked[0].features.string_match, best);
    assert_eq!(best, 1.0);
}

// ---- independent recomputation of the linear score ----

fn oracle_terms(text: &str) -> Vec<String> {
    let stop = ["was", "behind", "the", "a", "is", "it", "of", "and", "for", "from", "with", "by", "an", "to", "in"];
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            if cur.chars().count() > 1 && !stop.contains(&cur.as_str()) {
                out.push(cur.clone());
            }
            cur.clear();
        }
    }
    out
}

fn oracle_cosine(docs: &[&str], a: &str, b: &str, drop: &str) -> f64 {
    let n = docs.len() as f64;
    let mut df: HashMap<String, f64> = HashMap::new();
    for d in docs {
        let uniq: BTreeSet<String> = oracle_terms(d).into_iter().collect();
        for t in uniq {
            *df.entry(t).or_default() += 1.0;
        }
    }
    let vec = |s: &str| {
        let mut v: HashMap<String, f64> = HashMap::new();
        for t in oracle_terms(s) {
            if t == drop {
                continue;
            }
            *v.entry(t).or_default() += 1.0;
        }
        for (t, x) in v.iter_mut() {
            *x *= ((1.0 + n) / (1.0 + df[t])).ln() + 1.0;
        }
        v
    };
    let (va, vb) = (vec(a), vec(b));
    let dot: f64 = va.iter().map(|(t, x)| x * vb.get(t).unwrap_or(&0.0)).sum();
    let norm = |v: &HashMap<String, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    dot / (norm(&va) * norm(&vb))
}

#[test]
fn single_candidate_matches_oracle() {
    let desc = "cyber threat group from North Korea";
    let abs = "It carried out the WannaCry ransomware attack in 2017.";
    let c = LinkCandidate {
        qid: "Q19284445".into(),
        label: "Lazarus".into(),
        aliases: vec![],
        description: desc.into(),
        types: vec!["Q43229".into()],
        prominence: 33,
        abstract_first_sentence: Some(abs.into()),
    };
    let relevant: BTreeSet<String> = ["Q43229".to_string()].into();
    let w = LinkWeights::default();
    let r = rank("Lazarus", CONTEXT, &[c], &w, &relevant);
    let f = r.ranked[0].features;

    let cand_text = format!("{desc} {abs}");
    let ctx = oracle_cosine(&[CONTEXT, &cand_text], CONTEXT, &cand_text, "lazarus");
    // exact label, the only candidate is its own prominence maximum, relevant type
    let expected = 0.4 * 1.0 + 0.2 * 1.0 + 0.3 * ctx + 0.1 * 1.0;
    assert!((f.string_match - 1.0).abs() < 1e-9);
    assert!((f.prominence - 1.0).abs() < 1e-9);
    assert!((f.context - ctx).abs() < 1e-9, "{} vs {ctx}", f.context);
    assert!((f.type_match - 1.0).abs() < 1e-9);
    assert!((r.ranked[0].score - expected).abs() < 1e-9);
    assert!(ctx > 0.0);
}

// ---- link_document ----

struct FailOn(&'static str, FixtureClient);

impl CandidateSource for FailOn {
    fn search(&self, surface: &str) -> Result<Vec<LinkCandidate>, LinkError> {
        if surface == self.0 {
            Err(LinkError::Client("simulated outage".into()))
        } else {
            self.1.search(surface)
        }
    }
}

#[test]
fn link_document_cases() {
    let doc = Document::from_raw("d", "Lazarus was behind the WannaCry attack. The dropper hash was d41d8cd98f00b204e9800998ecf8427e.");
    let cfg = LinkConfig::default();
    let actor = Mention::new(0, 7, "Threat_Actor", Provenance::Model);
    let out = link_document(&doc, &[actor.clone()], &fixtures(), &cfg);
    assert_eq!(out.results.len(), 1);
    assert!(out.results[0].decision.qid().is_some());
    assert!(out.results[0].ranked.len() >= 20);

    let hash = Mention::new(61, 93, "Hash", Provenance::Rule);
    assert_eq!(doc.slice(61, 93), "d41d8cd98f00b204e9800998ecf8427e");
    let out = link_document(&doc, &[hash.clone()], &fixtures(), &cfg);
    assert!(out.results.iter().all(|r| r.decision == Decision::NotLinkable));

    let malware = Mention::new(23, 31, "Malware_Name", Provenance::Model);
    let ms = [actor, malware, Mention::new(32, 38, "Campaign", Provenance::Model)];
    let out = link_document(&doc, &ms, &FailOn("attack", fixtures()), &cfg);
    assert_eq!(out.results.len(), 2);
    assert_eq!(out.errors.len(), 1);
}
