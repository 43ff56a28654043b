use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::RwLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{LinkCandidate, LinkError};

/// Anything that can turn a surface string into hydrated candidates.
pub trait CandidateSource: Send + Sync {
    fn search(&self, surface: &str) -> Result<Vec<LinkCandidate>, LinkError>;
}

/// Requests up to this many candidates per query.
pub const MAX_CANDIDATES: usize = 50;

/// File-name key for a query: lowercase alphanumerics joined by `-`.
pub fn fixture_slug(query: &str) -> String {
    let mut out = String::new();
    for c in query.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            out.push(c);
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        "_empty".into()
    } else {
        out
    }
}

/// One recorded response: `DIR/<slug>.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureFile {
    pub query: String,
    pub candidates: Vec<LinkCandidate>,
}

/// Replays recorded search responses from a directory.
#[derive(Debug, Clone)]
pub struct FixtureClient {
    dir: PathBuf,
}

impl FixtureClient {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureClient { dir: dir.into() }
    }

    pub fn path_for(&self, query: &str) -> PathBuf {
        self.dir.join(format!("{}.json", fixture_slug(query)))
    }

    /// Writes a response in fixture form, e.g. after a live query.
    pub fn record(&self, query: &str, candidates: &[LinkCandidate]) -> Result<(), LinkError> {
        fs::create_dir_all(&self.dir).map_err(|e| LinkError::Client(e.to_string()))?;
        let file = FixtureFile { query: query.to_string(), candidates: candidates.to_vec() };
        let json = serde_json::to_string_pretty(&file).expect("fixture serialises");
        fs::write(self.path_for(query), json + "\n").map_err(|e| LinkError::Client(e.to_string()))
    }
}

impl CandidateSource for FixtureClient {
    fn search(&self, surface: &str) -> Result<Vec<LinkCandidate>, LinkError> {
        let path = self.path_for(surface);
        let text = fs::read_to_string(&path)
            .map_err(|e| LinkError::Client(format!("no fixture for `{surface}` at {}: {e}", path.display())))?;
        let file: FixtureFile = serde_json::from_str(&text)
            .map_err(|e| LinkError::Client(format!("malformed fixture {}: {e}", path.display())))?;
        for c in &file.candidates {
            c.validate()?;
        }
        Ok(file.candidates.into_iter().take(MAX_CANDIDATES).collect())
    }
}

/// Memoises another source; lookups take a read lock, misses a write lock.
pub struct CachedClient<C> {
    inner: C,
    cache: RwLock<HashMap<String, Vec<LinkCandidate>>>,
}

impl<C: CandidateSource> CachedClient<C> {
    pub fn new(inner: C) -> Self {
        CachedClient { inner, cache: RwLock::new(HashMap::new()) }
    }
}

impl<C: CandidateSource> CandidateSource for CachedClient<C> {
    fn search(&self, surface: &str) -> Result<Vec<LinkCandidate>, LinkError> {
        if let Some(hit) = self.cache.read().expect("cache lock").get(surface) {
            return Ok(hit.clone());
        }
        let found = self.inner.search(surface)?;
        self.cache.write().expect("cache lock").insert(surface.to_string(), found.clone());
        Ok(found)
    }
}

/// Queries a MediaWiki action API with Wikibase (e.g.
/// `https://www.wikidata.org/w/api.php`): `wbsearchentities` for ids, then
/// `wbgetentities` for labels, aliases, descriptions, `P31` types with their
/// `P279` ancestors, and sitelink counts as prominence.
pub struct LiveClient {
    endpoint: String,
    agent: ureq::Agent,
    type_depth: usize,
}

impl LiveClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(30))
            .user_agent(concat!("cyents/", env!("CARGO_PKG_VERSION")))
            .build();
        LiveClient { endpoint: endpoint.into(), agent, type_depth: 3 }
    }

    fn get(&self, params: &[(&str, &str)]) -> Result<Value, LinkError> {
        let mut req = self.agent.get(&self.endpoint).query("format", "json");
        for (k, v) in params {
            req = req.query(k, v);
        }
        let resp = req.call().map_err(|e| LinkError::Client(e.to_string()))?;
        let body = resp.into_string().map_err(|e| LinkError::Client(e.to_string()))?;
        serde_json::from_str(&body).map_err(|e| LinkError::Client(format!("malformed response: {e}")))
    }

    fn entities(&self, ids: &[String], props: &str) -> Result<BTreeMap<String, Value>, LinkError> {
        let mut out = BTreeMap::new();
        for chunk in ids.chunks(50) {
            let joined = chunk.join("|");
            let v = self.get(&[("action", "wbgetentities"), ("ids", &joined), ("props", props), ("languages", "en")])?;
            let ents = v.get("entities").and_then(Value::as_object).ok_or_else(|| malformed("entities"))?;
            out.extend(ents.iter().map(|(k, e)| (k.clone(), e.clone())));
        }
        Ok(out)
    }
}

fn malformed(what: &str) -> LinkError {
    LinkError::Client(format!("malformed response: missing `{what}`"))
}

/// Item ids from a `wbsearchentities` response.
pub fn parse_search(v: &Value) -> Result<Vec<String>, LinkError> {
    let hits = v.get("search").and_then(Value::as_array).ok_or_else(|| malformed("search"))?;
    Ok(hits.iter().filter_map(|h| h.get("id").and_then(Value::as_str)).map(String::from).collect())
}

/// Target ids of an entity's claims for `prop`.
pub fn claim_targets(entity: &Value, prop: &str) -> Vec<String> {
    entity
        .pointer(&format!("/claims/{prop}"))
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .filter_map(|c| c.pointer("/mainsnak/datavalue/value/id").and_then(Value::as_str))
        .map(String::from)
        .collect()
}

/// A candidate from one `wbgetentities` entity, with direct types only.
pub fn parse_entity(qid: &str, e: &Value) -> LinkCandidate {
    let text = |ptr: &str| e.pointer(ptr).and_then(Value::as_str).unwrap_or_default().to_string();
    LinkCandidate {
        qid: qid.to_string(),
        label: text("/labels/en/value"),
        aliases: e
            .pointer("/aliases/en")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
            .filter_map(|a| a.get("value").and_then(Value::as_str))
            .map(String::from)
            .collect(),
        description: text("/descriptions/en/value"),
        types: claim_targets(e, "P31"),
        prominence: e.get("sitelinks").and_then(Value::as_object).map_or(0, |s| s.len() as u64),
        abstract_first_sentence: None,
    }
}

impl CandidateSource for LiveClient {
    fn search(&self, surface: &str) -> Result<Vec<LinkCandidate>, LinkError> {
        let limit = MAX_CANDIDATES.to_string();
        let v = self.get(&[
            ("action", "wbsearchentities"),
            ("search", surface),
            ("language", "en"),
            ("type", "item"),
            ("limit", &limit),
        ])?;
        let ids = parse_search(&v)?;
        if ids.is_empty() {
            return Ok(Vec::new());
        }
        let ents = self.entities(&ids, "labels|aliases|descriptions|claims|sitelinks")?;
        let mut cands: Vec<LinkCandidate> =
            ids.iter().filter_map(|id| ents.get(id).map(|e| parse_entity(id, e))).collect();

        // walk subclass-of links upwards from the direct types
        let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut frontier: BTreeSet<String> = cands.iter().flat_map(|c| c.types.iter().cloned()).collect();
        for _ in 0..self.type_depth {
            let todo: Vec<String> = frontier.iter().filter(|t| !parents.contains_key(*t)).cloned().collect();
            if todo.is_empty() {
                break;
            }
            let found = self.entities(&todo, "claims")?;
            frontier.clear();
            for t in todo {
                let ups = found.get(&t).map(|e| claim_targets(e, "P279")).unwrap_or_default();
                frontier.extend(ups.iter().cloned());
                parents.insert(t, ups);
            }
        }
        for c in &mut cands {
            let mut all: BTreeSet<String> = BTreeSet::new();
            let mut stack = c.types.clone();
            while let Some(t) = stack.pop() {
                if all.insert(t.clone()) {
                    stack.extend(parents.get(&t).cloned().unwrap_or_default());
                }
            }
            c.types = all.into_iter().collect();
        }
        Ok(cands)
    }
}

/// A fixture directory must exist before it can be replayed.
pub fn fixture_client(dir: &Path) -> Result<FixtureClient, LinkError> {
    if !dir.is_dir() {
        return Err(LinkError::Client(format!("fixture directory {} does not exist", dir.display())));
    }
    Ok(FixtureClient::new(dir))
}
