use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use cyents::annotations::{agreement, load_jsonl, merge_group, save_jsonl, AnnotationSet};
use cyents::eval::report;
use cyents::ingest::{self, CorpusStore, FixtureHttp, HttpClient, LiveHttp};
use cyents::linker::{fixture_client, link_document, CachedClient, CandidateSource, Decision, LinkResult, LiveClient};
use cyents::mention::{merge_with_priority, Mention};
use cyents::ner::{synth, train as train_tagger, TaggerModel, TrainConfig};
use cyents::rules::{self, load_gazetteers, prepopulate_doc, seed_gazetteers, Gazetteer};
use cyents::schema::{Category, SchemaVersion, VersionId};
use cyents::text::{Corpus, TilingParams};
use cyents_service::{AnnotationService, ServiceConfig};
use serde::Serialize;

use crate::pipeline::{pick, PipelineConfig, UsageError};

pub const ENDPOINT_ENV: &str = "CYENTS_WIKIDATA_ENDPOINT";

/// Opens a store that must already exist.
fn existing_store(path: &Path) -> Result<CorpusStore> {
    if !path.is_dir() {
        bail!("store {} does not exist", path.display());
    }
    Ok(CorpusStore::open(path)?)
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    Ok(existing_store(path)?.load_corpus()?)
}

fn gazetteers(dir: Option<&Path>, schema: &SchemaVersion) -> Result<Vec<Gazetteer>> {
    match dir {
        Some(d) => load_gazetteers(d, schema).with_context(|| format!("loading gazetteers from {}", d.display())),
        None => Ok(seed_gazetteers()),
    }
}

fn load_set(path: &Path, corpus: Option<&Corpus>, schema: &SchemaVersion) -> Result<AnnotationSet> {
    load_jsonl(path, corpus, schema).with_context(|| format!("reading {}", path.display()))
}

fn save_set(set: &AnnotationSet, path: &Path) -> Result<()> {
    save_jsonl(set, path).with_context(|| format!("writing {}", path.display()))
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(v: &impl Serialize) -> Result<()> {
    emit(&(serde_json::to_string_pretty(v)? + "\n"))
}

pub fn ingest(
    cfg: &PipelineConfig,
    feeds: PathBuf,
    store: Option<PathBuf>,
    fixture: Option<PathBuf>,
    delay_ms: u64,
) -> Result<()> {
    let store_dir = pick(store, &cfg.store, "store")?;
    let list = fs::read_to_string(&feeds).with_context(|| format!("reading {}", feeds.display()))?;
    let urls = ingest::parse_feed_list(&list);
    let http: Box<dyn HttpClient> = match fixture {
        Some(dir) => Box::new(FixtureHttp::new(dir)),
        None => Box::new(LiveHttp::new(Duration::from_millis(delay_ms))),
    };
    let mut store = CorpusStore::open(&store_dir)?;
    let rep = ingest::sync(&mut store, &urls, http.as_ref(), &TilingParams::default())?;
    println!("added {}, skipped {}, errors {}", rep.added, rep.skipped, rep.errors.len());
    for e in &rep.errors {
        eprintln!("  {}: {}", e.url, e.message);
    }
    Ok(())
}

pub fn schema_export(cfg: &PipelineConfig, version: Option<String>, out: Option<PathBuf>) -> Result<()> {
    let id = match version.as_deref() {
        None => cfg.schema(),
        Some("round1") => VersionId::Round1,
        Some("round2") => VersionId::Round2,
        Some(other) => return Err(UsageError(format!("unknown schema version `{other}`")).into()),
    };
    let json = serde_json::to_string_pretty(&SchemaVersion::get(id).to_document())?;
    match out {
        Some(p) => fs::write(&p, json + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => emit(&(json + "\n"))?,
    }
    Ok(())
}

pub fn prepopulate(cfg: &PipelineConfig, store: Option<PathBuf>, gaz: Option<PathBuf>, out: PathBuf) -> Result<()> {
    let corpus = load_corpus(&pick(store, &cfg.store, "store")?)?;
    let schema = SchemaVersion::get(cfg.schema());
    let gaz = gazetteers(gaz.or_else(|| cfg.gazetteers.clone()).as_deref(), schema)?;
    let set = rules::prepopulate(corpus.values(), &gaz);
    save_set(&set, &out)?;
    println!("{} mentions over {} documents", set.len(), set.num_docs());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn serve(
    cfg: &PipelineConfig,
    store: Option<PathBuf>,
    annotations: Option<PathBuf>,
    port: Option<u16>,
    config: Option<PathBuf>,
    gaz: Option<PathBuf>,
    ui: Option<PathBuf>,
) -> Result<()> {
    let corpus = load_corpus(&pick(store, &cfg.store, "store")?)?;
    let ann_dir = pick(annotations, &cfg.annotations, "annotations")?;
    let config_path = pick(config, &cfg.service, "config")?;
    let raw = fs::read_to_string(&config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let svc_cfg: ServiceConfig =
        serde_json::from_str(&raw).with_context(|| format!("parsing {}", config_path.display()))?;
    let schema = SchemaVersion::get(svc_cfg.schema_version);
    let gaz = gazetteers(gaz.or_else(|| cfg.gazetteers.clone()).as_deref(), schema)?;
    let service = Arc::new(AnnotationService::open(svc_cfg, corpus, gaz, ann_dir)?);
    let port = port.or(cfg.port).unwrap_or(8642);
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    eprintln!("serving on http://{addr}");
    rt.block_on(cyents_service::serve(service, addr, ui))?;
    Ok(())
}

pub fn iaa(cfg: &PipelineConfig, a: PathBuf, b: PathBuf, store: Option<PathBuf>, json: bool) -> Result<()> {
    let schema = SchemaVersion::get(cfg.schema());
    let corpus = match store.or_else(|| cfg.store.clone()) {
        Some(s) => Some(load_corpus(&s)?),
        None => None,
    };
    let sa = load_set(&a, corpus.as_ref(), schema)?;
    let sb = load_set(&b, corpus.as_ref(), schema)?;
    // compare only what both annotated
    let shared: Vec<String> = sa.doc_ids().intersection(&sb.doc_ids()).map(|s| s.to_string()).collect();
    if shared.is_empty() {
        bail!("the two files share no document");
    }
    let ids = shared.iter().map(String::as_str);
    let mut ra = sa.restrict(ids.clone());
    let mut rb = sb.restrict(ids);
    ra.annotator_id = sa.annotator_id.clone();
    rb.annotator_id = sb.annotator_id.clone();
    let rep = agreement(&ra, &rb)?;
    if json {
        return print_json(&rep);
    }
    println!("{} vs {} over {} documents", rep.pair.0, rep.pair.1, shared.len());
    println!("mentions: {} / {}, accepted {}", rep.count_a, rep.count_b, rep.accepted);
    println!("acceptance rate {:.4}, pairwise F1 {:.4}", rep.acceptance_rate, rep.pairwise_f1);
    for (t, ag) in &rep.per_type_agreement {
        println!("  {t:<22} {:>5} {:>5} {:>5}", ag.a_count, ag.b_count, ag.agreed);
    }
    Ok(())
}

pub fn merge(cfg: &PipelineConfig, group: Vec<PathBuf>, out: PathBuf, store: Option<PathBuf>) -> Result<()> {
    let schema = SchemaVersion::get(cfg.schema());
    let corpus = match store.or_else(|| cfg.store.clone()) {
        Some(s) => Some(load_corpus(&s)?),
        None => None,
    };
    let sets = group.iter().map(|p| load_set(p, corpus.as_ref(), schema)).collect::<Result<Vec<_>>>()?;
    let merged = merge_group(&sets)?;
    save_set(&merged, &out)?;
    println!("accepted {} mentions over {} documents", merged.len(), merged.num_docs());
    Ok(())
}

/// Keeps the statistical labels of the model's schema; logs the rest.
fn statistical_only(set: &AnnotationSet, version: VersionId) -> AnnotationSet {
    let keep = SchemaVersion::get(version).names_in(Category::Statistical);
    let mut dropped: BTreeMap<String, usize> = BTreeMap::new();
    for (_, ms) in set.iter() {
        for m in ms.iter().filter(|m| !keep.contains(&m.label.as_str())) {
            *dropped.entry(m.label.clone()).or_default() += 1;
        }
    }
    for (label, n) in &dropped {
        log::info!("train: dropping {n} `{label}` mentions (rule-only type)");
    }
    set.filter_labels(|l| keep.contains(&l))
}

#[allow(clippy::too_many_arguments)]
pub fn train(
    cfg: &PipelineConfig,
    data: PathBuf,
    store: Option<PathBuf>,
    config: Option<PathBuf>,
    out: PathBuf,
    epochs: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let corpus = load_corpus(&pick(store, &cfg.store, "store")?)?;
    let version = cfg.schema();
    let mut tc: TrainConfig = match config {
        Some(p) => {
            let raw = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&raw).with_context(|| format!("parsing {}", p.display()))?
        }
        None => cfg.tagger.clone().unwrap_or_default(),
    };
    if let Some(e) = epochs {
        tc.epochs = e;
    }
    if let Some(s) = seed {
        tc.rng_seed = s;
    }
    tc.validate()?;
    let set = load_set(&data, Some(&corpus), SchemaVersion::get(version))?;
    let set = statistical_only(&set, version);
    let docs: Corpus = corpus.into_iter().filter(|(k, _)| set.contains_doc(k)).collect();
    if docs.is_empty() {
        bail!("no training document of {} is in the store", data.display());
    }
    let model = train_tagger(&docs, &set, version, &tc)?;
    model.save(&out).with_context(|| format!("writing {}", out.display()))?;
    println!("trained on {} documents, {} mentions; model written to {}", docs.len(), set.len(), out.display());
    Ok(())
}

pub fn extract(
    cfg: &PipelineConfig,
    model: PathBuf,
    store: Option<PathBuf>,
    out: PathBuf,
    rules: bool,
    gaz: Option<PathBuf>,
) -> Result<()> {
    let corpus = load_corpus(&pick(store, &cfg.store, "store")?)?;
    let tagger = TaggerModel::load(&model).with_context(|| format!("loading {}", model.display()))?;
    let mut set = tagger.predict_all(corpus.values());
    if rules {
        let schema = SchemaVersion::get(tagger.schema_version());
        let gaz = gazetteers(gaz.or_else(|| cfg.gazetteers.clone()).as_deref(), schema)?;
        let mut merged = AnnotationSet::new(set.annotator_id.clone());
        for doc in corpus.values() {
            let model_ms = set.mentions(&doc.doc_id).to_vec();
            merged.insert(doc.doc_id.clone(), merge_with_priority(model_ms, prepopulate_doc(doc, &gaz)));
        }
        set = merged;
    }
    save_set(&set, &out)?;
    println!("{} mentions over {} documents", set.len(), set.num_docs());
    Ok(())
}

#[derive(Serialize)]
struct Link<'a> {
    qid: Option<&'a str>,
    score: Option<f64>,
    alternatives: Vec<Alternative<'a>>,
}

#[derive(Serialize)]
struct Alternative<'a> {
    qid: &'a str,
    score: f64,
}

#[derive(Serialize)]
struct LinkedMention<'a> {
    #[serde(flatten)]
    mention: &'a Mention,
    surface: &'a str,
    link: Link<'a>,
}

#[derive(Serialize)]
struct LinkedLine<'a> {
    doc_id: &'a str,
    annotator: &'a str,
    spans: Vec<LinkedMention<'a>>,
}

fn linked(r: &LinkResult) -> LinkedMention<'_> {
    let qid = r.decision.qid();
    let score = match r.decision {
        Decision::Linked(_) => r.ranked.first().map(|c| c.score),
        _ => None,
    };
    let skip = usize::from(qid.is_some());
    let alternatives = r
        .ranked
        .iter()
        .skip(skip)
        .take(3)
        .map(|c| Alternative { qid: &c.candidate.qid, score: c.score })
        .collect();
    LinkedMention { mention: &r.mention, surface: &r.surface, link: Link { qid, score, alternatives } }
}

pub fn link(
    cfg: &PipelineConfig,
    model_output: PathBuf,
    store: Option<PathBuf>,
    fixture: Option<PathBuf>,
    endpoint: Option<String>,
    out: PathBuf,
) -> Result<()> {
    let corpus = load_corpus(&pick(store, &cfg.store, "store")?)?;
    let set = load_set(&model_output, Some(&corpus), SchemaVersion::get(cfg.schema()))?;
    let client: Box<dyn CandidateSource> = match (fixture.or_else(|| cfg.linker_fixture.clone()), endpoint) {
        (Some(_), Some(_)) => return Err(UsageError("give either --fixture or --endpoint, not both".into()).into()),
        (Some(dir), None) => Box::new(fixture_client(&dir)?),
        (None, Some(url)) => Box::new(CachedClient::new(LiveClient::new(url))),
        (None, None) => match cfg.endpoint.clone().or_else(|| std::env::var(ENDPOINT_ENV).ok()) {
            Some(url) => Box::new(CachedClient::new(LiveClient::new(url))),
            None => {
                return Err(UsageError(format!("missing --fixture or --endpoint (or ${ENDPOINT_ENV})")).into());
            }
        },
    };
    let lcfg = cfg.linker.clone().unwrap_or_default();
    let file = File::create(&out).with_context(|| format!("writing {}", out.display()))?;
    let mut w = BufWriter::new(file);
    let (mut n_linked, mut n_nil, mut n_err) = (0, 0, 0);
    for (doc_id, ms) in set.iter() {
        let doc = &corpus[doc_id];
        let links = link_document(doc, ms, client.as_ref(), &lcfg);
        for (m, e) in &links.errors {
            log::warn!("link: {doc_id} [{}, {}): {e}", m.start, m.end);
        }
        n_err += links.errors.len();
        n_linked += links.results.iter().filter(|r| r.decision.qid().is_some()).count();
        n_nil += links.results.iter().filter(|r| r.decision == Decision::Nil).count();
        let line = LinkedLine { doc_id, annotator: &set.annotator_id, spans: links.results.iter().map(linked).collect() };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    println!("linked {n_linked}, nil {n_nil}, failed {n_err}");
    Ok(())
}

pub fn eval(cfg: &PipelineConfig, gold: PathBuf, pred: PathBuf, store: Option<PathBuf>, json: bool) -> Result<()> {
    let schema = SchemaVersion::get(cfg.schema());
    let corpus = match store.or_else(|| cfg.store.clone()) {
        Some(s) => Some(load_corpus(&s)?),
        None => None,
    };
    let g = load_set(&gold, corpus.as_ref(), schema)?;
    let p = load_set(&pred, corpus.as_ref(), schema)?;
    // score on the gold documents; a document the model skipped predicts nothing
    let gold_ids: Vec<&str> = g.doc_ids().into_iter().collect();
    let mut p2 = p.restrict(gold_ids.iter().copied());
    for id in &gold_ids {
        if !p2.contains_doc(id) {
            p2.insert(*id, Vec::new());
        }
    }
    let rep = report(&g, &p2).map_err(|e| anyhow!(e))?;
    if json {
        print_json(&rep)
    } else {
        emit(&rep.render_table())
    }
}

#[allow(clippy::too_many_arguments)]
pub fn synth(
    cfg: &PipelineConfig,
    store: Option<PathBuf>,
    gold: PathBuf,
    heldout_gold: PathBuf,
    seed: u64,
    n_train: usize,
    n_heldout: usize,
) -> Result<()> {
    let mut store = CorpusStore::open(pick(store, &cfg.store, "store")?)?;
    let sc = synth::generate(seed, n_train, n_heldout);
    for doc in sc.train.docs.values().chain(sc.heldout.docs.values()) {
        store.put(doc)?;
    }
    save_set(&sc.train.gold, &gold)?;
    save_set(&sc.heldout.gold, &heldout_gold)?;
    println!("wrote {} training and {} held-out documents", sc.train.docs.len(), sc.heldout.docs.len());
    Ok(())
}
