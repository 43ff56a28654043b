use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cyents::ingest::doc_id_for;
use serde_json::Value;
use tempfile::TempDir;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn cyents(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyents"))
        .args(args)
        .current_dir(dir)
        .env_remove("CYENTS_WIKIDATA_ENDPOINT")
        .env("RUST_LOG", "warn")
        .output()
        .expect("run cyents")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cyents(dir, args);
    assert_eq!(out.status.code(), Some(0), "{args:?}\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Temp dir with the recorded web fixtures ingested into `store/`.
fn ingested() -> TempDir {
    let tmp = TempDir::new().unwrap();
    let web = fixtures().join("web");
    ok(
        tmp.path(),
        &["ingest", "--feeds", web.join("feeds.txt").to_str().unwrap(), "--store", "store", "--fixture", web.to_str().unwrap()],
    );
    tmp
}

#[test]
fn gold_against_itself_scores_100() {
    let tmp = ingested();
    let d = tmp.path();
    ok(d, &["prepopulate", "--store", "store", "--out", "pre.jsonl"]);
    let table = ok(d, &["eval", "--gold", "pre.jsonl", "--pred", "pre.jsonl", "--store", "store"]);
    let micro = table.lines().find(|l| l.starts_with("micro")).unwrap();
    assert_eq!(micro.split_whitespace().take(4).collect::<Vec<_>>(), ["micro", "100.00", "100.00", "100.00"]);
    let json: Value = serde_json::from_str(&ok(d, &["eval", "--gold", "pre.jsonl", "--pred", "pre.jsonl", "--json"])).unwrap();
    assert_eq!(json["micro"]["f_score"], 100.0);
}

#[test]
fn eval_scores_missing_pred_docs_as_empty() {
    let tmp = ingested();
    let d = tmp.path();
    ok(d, &["prepopulate", "--store", "store", "--out", "pre.jsonl"]);
    let pre = fs::read_to_string(d.join("pre.jsonl")).unwrap();
    let first: Vec<&str> = pre.lines().take(1).collect();
    fs::write(d.join("partial.jsonl"), first.join("\n") + "\n").unwrap();
    let json: Value =
        serde_json::from_str(&ok(d, &["eval", "--gold", "pre.jsonl", "--pred", "partial.jsonl", "--json"])).unwrap();
    let micro = &json["micro"];
    assert_eq!(micro["fp"], 0);
    assert!(micro["fn"].as_u64().unwrap() > 0);
    assert_eq!(micro["precision"], 100.0);
}

#[test]
fn usage_errors_exit_2_and_domain_errors_exit_1() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert_eq!(cyents(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(cyents(d, &["eval", "--gold", "g.jsonl"]).status.code(), Some(2));
    // --store has no default and no pipeline config
    assert_eq!(cyents(d, &["prepopulate", "--out", "x.jsonl"]).status.code(), Some(2));
    assert_eq!(cyents(d, &["schema", "export", "--version", "round9"]).status.code(), Some(2));
    assert_eq!(cyents(d, &["--help"]).status.code(), Some(0));

    let missing = cyents(d, &["eval", "--gold", "nope.jsonl", "--pred", "nope.jsonl"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.jsonl"));
    assert_eq!(cyents(d, &["prepopulate", "--store", "absent", "--out", "x.jsonl"]).status.code(), Some(1));
}

#[test]
fn pipeline_config_supplies_defaults() {
    let tmp = ingested();
    let d = tmp.path();
    fs::write(d.join("pipeline.json"), r#"{"store": "store", "schema_version": "round2"}"#).unwrap();
    let out = ok(d, &["--pipeline", "pipeline.json", "prepopulate", "--out", "pre.jsonl"]);
    assert!(out.contains("over 5 documents"), "{out}");
    // a flag wins over the config value
    let bad = cyents(d, &["--pipeline", "pipeline.json", "prepopulate", "--store", "elsewhere", "--out", "p.jsonl"]);
    assert_eq!(bad.status.code(), Some(1));

    fs::write(d.join("typo.json"), r#"{"stroe": "store"}"#).unwrap();
    assert_eq!(cyents(d, &["--pipeline", "typo.json", "prepopulate", "--out", "p.jsonl"]).status.code(), Some(1));
    fs::write(d.join("dangling.json"), r#"{"gazetteers": "no/such/dir"}"#).unwrap();
    let e = cyents(d, &["--pipeline", "dangling.json", "prepopulate", "--store", "store", "--out", "p.jsonl"]);
    assert_eq!(e.status.code(), Some(1));
}

#[test]
fn schema_export_versions() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let r1: Value = serde_json::from_str(&ok(d, &["schema", "export", "--version", "round1"])).unwrap();
    assert_eq!(r1["version"], "round1");
    ok(d, &["schema", "export", "--out", "schema.json"]);
    let r2: Value = serde_json::from_str(&fs::read_to_string(d.join("schema.json")).unwrap()).unwrap();
    assert_eq!(r2["version"], "round2");
    assert!(r2["types"].as_array().unwrap().iter().any(|t| t["name"] == "Threat_Actor"));
}

fn line(doc: &str, annotator: &str, spans: &[(usize, usize, &str)]) -> String {
    let spans: Vec<Value> = spans
        .iter()
        .map(|&(s, e, l)| serde_json::json!({"start": s, "end": e, "label": l, "provenance": "human"}))
        .collect();
    serde_json::json!({"doc_id": doc, "annotator": annotator, "spans": spans}).to_string() + "\n"
}

#[test]
fn iaa_and_merge_on_two_annotators() {
    let tmp = ingested();
    let d = tmp.path();
    let doc = doc_id_for("https://blog.example.com/2021/lazarus-wannacry");
    // "Lazarus Group" 0..13, "WannaCry" 29..37, "May 2017" 92..100
    fs::write(d.join("a.jsonl"), line(&doc, "ann1", &[(0, 13, "Threat_Actor"), (29, 37, "Malware_Name")])).unwrap();
    fs::write(
        d.join("b.jsonl"),
        line(&doc, "ann2", &[(0, 7, "Threat_Actor"), (29, 37, "Malware_Name"), (92, 100, "DATE")]),
    )
    .unwrap();
    let rep: Value =
        serde_json::from_str(&ok(d, &["iaa", "--a", "a.jsonl", "--b", "b.jsonl", "--store", "store", "--json"])).unwrap();
    assert_eq!(rep["accepted"], 1);
    assert_eq!(rep["total_max"], 3);
    assert!((rep["pairwise_f1"].as_f64().unwrap() - 0.4).abs() < 1e-12);

    ok(d, &["merge", "--group", "a.jsonl", "b.jsonl", "--out", "accepted.jsonl", "--store", "store"]);
    let merged = fs::read_to_string(d.join("accepted.jsonl")).unwrap();
    let v: Value = serde_json::from_str(merged.lines().next().unwrap()).unwrap();
    let spans = v["spans"].as_array().unwrap();
    assert_eq!(spans.len(), 1);
    assert_eq!((spans[0]["start"].as_u64(), spans[0]["label"].as_str()), (Some(29), Some("Malware_Name")));
    assert_eq!(cyents(d, &["merge", "--group", "a.jsonl", "--out", "x.jsonl"]).status.code(), Some(2));
}

#[test]
fn link_against_recorded_responses() {
    let tmp = ingested();
    let d = tmp.path();
    let doc = doc_id_for("https://blog.example.com/2021/lazarus-wannacry");
    // "Lazarus" 0..7, "WannaCry" 29..37, "445" on a later sentence
    let text = fs::read_to_string(d.join(format!("store/docs/{doc}.jsonl"))).unwrap();
    let text: Value = serde_json::from_str(&text).unwrap();
    let text = text["text"].as_str().unwrap();
    let chars: Vec<char> = text.chars().collect();
    let port = text.find("port 445").map(|b| text[..b].chars().count() + 5).unwrap();
    assert_eq!(chars[port..port + 3].iter().collect::<String>(), "445");
    fs::write(
        d.join("pred.jsonl"),
        line(&doc, "model", &[(0, 7, "Threat_Actor"), (29, 37, "Malware_Name"), (port, port + 3, "Port")]),
    )
    .unwrap();
    let linker = fixtures().join("linker");
    let args = ["link", "--model-output", "pred.jsonl", "--store", "store", "--out", "linked.jsonl"];
    let mut with_fixture = args.to_vec();
    with_fixture.extend(["--fixture", linker.to_str().unwrap()]);
    ok(d, &with_fixture);
    let out = fs::read_to_string(d.join("linked.jsonl")).unwrap();
    let v: Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    let spans = v["spans"].as_array().unwrap();
    assert_eq!(spans[0]["surface"], "Lazarus");
    assert_eq!(spans[0]["link"]["qid"], "Q19284445");
    assert!(spans[0]["link"]["score"].as_f64().unwrap() > 0.0);
    assert!(!spans[0]["link"]["alternatives"].as_array().unwrap().is_empty());
    assert!(spans[2]["link"]["qid"].is_null());

    // no fixture, no endpoint, no env var
    assert_eq!(cyents(d, &args).status.code(), Some(2));
}

#[test]
fn train_and_extract_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--store", "store", "--gold", "g.jsonl", "--heldout-gold", "h.jsonl", "--train", "30", "--heldout", "5"]);
    ok(d, &["train", "--data", "g.jsonl", "--store", "store", "--out", "m1.cyents", "--epochs", "2"]);
    ok(d, &["train", "--data", "g.jsonl", "--store", "store", "--out", "m2.cyents", "--epochs", "2"]);
    assert_eq!(fs::read(d.join("m1.cyents")).unwrap(), fs::read(d.join("m2.cyents")).unwrap());

    ok(d, &["extract", "--model", "m1.cyents", "--store", "store", "--out", "p1.jsonl"]);
    ok(d, &["extract", "--model", "m2.cyents", "--store", "store", "--out", "p2.jsonl"]);
    assert_eq!(fs::read(d.join("p1.jsonl")).unwrap(), fs::read(d.join("p2.jsonl")).unwrap());

    // rule mentions only fill gaps: every model mention survives
    ok(d, &["extract", "--model", "m1.cyents", "--store", "store", "--out", "p3.jsonl", "--rules"]);
    let spans = |f: &str| -> Vec<(String, Value)> {
        fs::read_to_string(d.join(f))
            .unwrap()
            .lines()
            .flat_map(|l| {
                let v: Value = serde_json::from_str(l).unwrap();
                let id = v["doc_id"].as_str().unwrap().to_string();
                v["spans"].as_array().unwrap().iter().map(move |s| (id.clone(), s.clone())).collect::<Vec<_>>()
            })
            .collect()
    };
    let (model, both) = (spans("p1.jsonl"), spans("p3.jsonl"));
    assert!(both.len() >= model.len());
    for m in &model {
        assert!(both.contains(m), "{m:?}");
    }
}

#[test]
fn ingest_twice_is_idempotent() {
    let tmp = ingested();
    let web = fixtures().join("web");
    let out = ok(
        tmp.path(),
        &["ingest", "--feeds", web.join("feeds.txt").to_str().unwrap(), "--store", "store", "--fixture", web.to_str().unwrap()],
    );
    assert!(out.starts_with("added 0, skipped 5"), "{out}");
}
