use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use xxhash_rust::xxh64::xxh64;

use super::IngestError;
use crate::text::{Corpus, Document};

/// Stable document id for an article URL.
pub fn doc_id_for(url: &str) -> String {
    format!("doc-{:016x}", xxh64(url.as_bytes(), 0))
}

/// On-disk corpus: `docs/<doc_id>.jsonl` holds one document per file and
/// `index.json` maps article URL to doc id.
#[derive(Debug)]
pub struct CorpusStore {
    root: PathBuf,
    index: BTreeMap<String, String>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IngestError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl CorpusStore {
    /// Opens `root`, creating it if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, IngestError> {
        let root = root.into();
        fs::create_dir_all(root.join("docs"))?;
        let index_path = root.join("index.json");
        let index = if index_path.exists() {
            serde_json::from_str(&fs::read_to_string(&index_path)?)
                .map_err(|e| IngestError::Store(format!("{}: {e}", index_path.display())))?
        } else {
            BTreeMap::new()
        };
        Ok(CorpusStore { root, index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn index(&self) -> &BTreeMap<String, String> {
        &self.index
    }

    pub fn contains_url(&self, url: &str) -> bool {
        self.index.contains_key(url)
    }

    fn doc_path(&self, doc_id: &str) -> PathBuf {
        self.root.join("docs").join(format!("{doc_id}.jsonl"))
    }

    /// Writes the document, then records its URL (if any) in the index.
    pub fn put(&mut self, doc: &Document) -> Result<(), IngestError> {
        if doc.doc_id.is_empty() || doc.doc_id.contains(['/', '\\']) || doc.doc_id.starts_with('.') {
            return Err(IngestError::Store(format!("unusable doc id `{}`", doc.doc_id)));
        }
        let mut line = serde_json::to_string(doc).map_err(|e| IngestError::Store(e.to_string()))?;
        line.push('\n');
        write_atomic(&self.doc_path(&doc.doc_id), line.as_bytes())?;
        if let Some(url) = &doc.source_url {
            self.index.insert(url.clone(), doc.doc_id.clone());
            let json = serde_json::to_vec_pretty(&self.index).map_err(|e| IngestError::Store(e.to_string()))?;
            write_atomic(&self.root.join("index.json"), &json)?;
        }
        Ok(())
    }

    pub fn get(&self, doc_id: &str) -> Result<Document, IngestError> {
        let path = self.doc_path(doc_id);
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(text.trim_end()).map_err(|e| IngestError::Store(format!("{}: {e}", path.display())))
    }

    /// Ids of every stored document, sorted.
    pub fn doc_ids(&self) -> Result<Vec<String>, IngestError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join("docs"))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".jsonl") {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn load_corpus(&self) -> Result<Corpus, IngestError> {
        self.doc_ids()?.into_iter().map(|id| Ok((id.clone(), self.get(&id)?))).collect()
    }
}
