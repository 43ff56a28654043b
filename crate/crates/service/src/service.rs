use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use cyents::annotations::{agreement, load_jsonl, save_jsonl, AnnotationLine, AnnotationSet, IAAReport};
use cyents::mention::Mention;
use cyents::rules::{prepopulate_doc, Gazetteer};
use cyents::schema::{SchemaDocument, SchemaVersion};
use cyents::text::{Corpus, Document};
use log::info;
use serde::Serialize;

use crate::config::ServiceConfig;
use crate::queue::TaskQueue;
use crate::{ServiceError, SpanIssue};

/// What `next_task` hands out.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum NextTask {
    Task {
        doc: Document,
        pre_annotations: Vec<Mention>,
        position: usize,
        total: usize,
    },
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ack {
    pub doc_id: String,
    pub annotator: String,
    pub spans: usize,
    pub replaced: bool,
}

/// Mutable study state. Readers clone the `Arc` and never block writers for
/// longer than the pointer swap.
#[derive(Debug, Clone, Default)]
struct State {
    queue: TaskQueue,
    sets: BTreeMap<String, AnnotationSet>,
}

pub struct AnnotationService {
    config: ServiceConfig,
    schema: &'static SchemaVersion,
    corpus: Corpus,
    gazetteers: Vec<Gazetteer>,
    dir: PathBuf,
    snapshot: RwLock<Arc<State>>,
    writer: Mutex<()>,
}

impl AnnotationService {
    /// Validates the config and reloads every annotator's saved work from
    /// `annotations_dir/<annotator>.jsonl`.
    pub fn open(
        config: ServiceConfig,
        corpus: Corpus,
        gazetteers: Vec<Gazetteer>,
        annotations_dir: impl Into<PathBuf>,
    ) -> Result<Self, ServiceError> {
        config.validate(&corpus)?;
        let corpus: Corpus = match config.paragraphs_per_doc {
            Some(n) => corpus.into_iter().map(|(k, d)| (k, d.first_paragraphs(n))).collect(),
            None => corpus,
        };
        let schema = SchemaVersion::get(config.schema_version);
        let dir = annotations_dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| ServiceError::Persist(e.to_string()))?;
        let mut state = State { queue: TaskQueue::from_config(&config, corpus.keys()), sets: BTreeMap::new() };
        for annotator in state.queue.assignments.keys().cloned().collect::<Vec<_>>() {
            let path = Self::path_in(&dir, &annotator);
            let set = if path.exists() {
                let mut set = load_jsonl(&path, Some(&corpus), schema)
                    .map_err(|e| ServiceError::Persist(format!("{}: {e}", path.display())))?;
                set.annotator_id = annotator.clone();
                set
            } else {
                AnnotationSet::new(annotator.clone())
            };
            for d in set.doc_ids() {
                state.queue.complete(&annotator, d);
            }
            state.sets.insert(annotator, set);
        }
        Ok(AnnotationService {
            config,
            schema,
            corpus,
            gazetteers,
            dir,
            snapshot: RwLock::new(Arc::new(state)),
            writer: Mutex::new(()),
        })
    }

    fn path_in(dir: &Path, annotator: &str) -> PathBuf {
        dir.join(format!("{annotator}.jsonl"))
    }

    fn state(&self) -> Arc<State> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn schema(&self) -> SchemaDocument {
        self.schema.to_document()
    }

    pub fn document(&self, doc_id: &str) -> Result<&Document, ServiceError> {
        self.corpus.get(doc_id).ok_or_else(|| ServiceError::UnknownDoc(doc_id.to_string()))
    }

    /// Token check; passes everything when no tokens are configured.
    pub fn authorize(&self, annotator: &str, token: Option<&str>) -> Result<(), ServiceError> {
        if self.config.tokens.is_empty() {
            return Ok(());
        }
        match (self.config.tokens.get(annotator), token) {
            (Some(want), Some(got)) if want == got => Ok(()),
            _ => Err(ServiceError::Unauthorized(annotator.to_string())),
        }
    }

    pub fn next_task(&self, annotator: &str) -> Result<NextTask, ServiceError> {
        let state = self.state();
        if !state.queue.is_registered(annotator) {
            return Err(ServiceError::UnknownAnnotator(annotator.to_string()));
        }
        let total = state.queue.assignments[annotator].len();
        Ok(match state.queue.next(annotator) {
            Some((position, doc_id)) => {
                let doc = self.document(doc_id)?;
                NextTask::Task {
                    doc: doc.clone(),
                    pre_annotations: prepopulate_doc(doc, &self.gazetteers),
                    position,
                    total,
                }
            }
            None => NextTask::Done,
        })
    }

    /// Every problem with the submitted spans, by index.
    fn span_issues(&self, doc: &Document, spans: &[Mention]) -> Vec<SpanIssue> {
        let len = doc.char_len();
        let mut issues = Vec::new();
        for (i, m) in spans.iter().enumerate() {
            if m.start >= m.end {
                issues.push(SpanIssue::new(i, format!("empty or reversed span {}..{}", m.start, m.end)));
            } else if m.end > len {
                issues.push(SpanIssue::new(i, format!("span {}..{} exceeds document length {len}", m.start, m.end)));
            }
            if !self.schema.contains(&m.label) {
                issues.push(SpanIssue::new(
                    i,
                    format!("label `{}` is not in schema {}", m.label, self.config.schema_version),
                ));
            }
            for (j, o) in spans.iter().enumerate().take(i) {
                if m.overlaps(o) {
                    issues.push(SpanIssue::new(i, format!("overlaps span {j} ({}..{})", o.start, o.end)));
                }
            }
        }
        issues
    }

    /// Validates, persists, then acknowledges. Resubmitting a document
    /// replaces the earlier spans.
    pub fn submit(&self, line: AnnotationLine) -> Result<Ack, ServiceError> {
        let AnnotationLine { doc_id, annotator, spans } = line;
        let doc = self.document(&doc_id)?;
        let issues = self.span_issues(doc, &spans);
        if !issues.is_empty() {
            return Err(ServiceError::Validation(issues));
        }
        let _guard = self.writer.lock().expect("writer lock");
        let mut state = (*self.state()).clone();
        if !state.queue.is_registered(&annotator) {
            return Err(ServiceError::UnknownAnnotator(annotator));
        }
        if !state.queue.is_assigned(&annotator, &doc_id) {
            return Err(ServiceError::NotAssigned { annotator, doc_id });
        }
        let set = state.sets.entry(annotator.clone()).or_insert_with(|| AnnotationSet::new(annotator.clone()));
        let replaced = set.contains_doc(&doc_id);
        let n = spans.len();
        set.insert(doc_id.clone(), spans);
        save_jsonl(set, &Self::path_in(&self.dir, &annotator)).map_err(|e| ServiceError::Persist(e.to_string()))?;
        if replaced {
            info!("{annotator} resubmitted {doc_id}; previous spans replaced");
        }
        state.queue.complete(&annotator, &doc_id);
        *self.snapshot.write().expect("snapshot lock") = Arc::new(state);
        Ok(Ack { doc_id, annotator, spans: n, replaced })
    }

    /// Exact-match agreement over the documents both members have completed.
    pub fn iaa_status(&self, group: &str) -> Result<IAAReport, ServiceError> {
        let g = self.config.groups.get(group).ok_or_else(|| ServiceError::UnknownGroup(group.to_string()))?;
        let (a, b) = (&g.annotators[0], &g.annotators[1]);
        let state = self.state();
        let done_a = state.queue.completed_by(a);
        let done_b = state.queue.completed_by(b);
        let common: Vec<&str> = done_a.intersection(&done_b).copied().collect();
        if common.is_empty() {
            return Err(ServiceError::InsufficientData(group.to_string()));
        }
        let sa = state.sets[a].restrict(common.iter().copied());
        let sb = state.sets[b].restrict(common.iter().copied());
        agreement(&sa, &sb).map_err(|e| ServiceError::Persist(e.to_string()))
    }

    /// The saved set of one annotator.
    pub fn annotations(&self, annotator: &str) -> Option<AnnotationSet> {
        self.state().sets.get(annotator).cloned()
    }
}
