//! JSON-over-HTTP backend for double annotation: task assignment with rule
//! pre-annotations, submission with write-before-ack persistence, and live
//! inter-annotator agreement per group.

mod config;
mod queue;
mod routes;
mod service;

use serde::Serialize;
use thiserror::Error;

pub use config::{GroupConfig, ServiceConfig};
pub use queue::TaskQueue;
pub use routes::{router, serve, TOKEN_HEADER};
pub use service::{Ack, AnnotationService, NextTask};

/// Why one submitted span was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpanIssue {
    pub index: usize,
    pub reason: String,
}

impl SpanIssue {
    pub fn new(index: usize, reason: String) -> Self {
        SpanIssue { index, reason }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(String),
    #[error("unknown document `{0}`")]
    UnknownDoc(String),
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("document `{doc_id}` is not assigned to `{annotator}`")]
    NotAssigned { annotator: String, doc_id: String },
    #[error("{} invalid span(s)", .0.len())]
    Validation(Vec<SpanIssue>),
    #[error("group `{0}` has no document completed by both annotators")]
    InsufficientData(String),
    #[error("missing or wrong token for `{0}`")]
    Unauthorized(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("persistence: {0}")]
    Persist(String),
}
