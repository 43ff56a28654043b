//! Feed polling, article extraction and the on-disk corpus store.
//!
//! Network access goes through [`HttpClient`]; tests use [`FixtureHttp`],
//! which serves recorded pages from a directory.

mod extract;
mod feed;
mod http;
mod store;

use serde::Serialize;
use thiserror::Error;

pub use extract::extract_article;
pub use feed::{parse_feed, ArticleRef};
pub use http::{fixture_name, FixtureHttp, HttpClient, LiveHttp};
pub use store::{doc_id_for, CorpusStore};

use crate::text::{Document, TextError, TilingParams};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("network error fetching {url}: {message}")]
    Network { url: String, message: String },
    #[error("cannot parse feed {url}: {message}")]
    FeedParse { url: String, message: String },
    #[error("no article text found")]
    EmptyExtraction,
    #[error("corpus store: {0}")]
    Store(String),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fetches and parses one feed.
pub fn fetch_feed(feed_url: &str, http: &dyn HttpClient) -> Result<Vec<ArticleRef>, IngestError> {
    parse_feed(feed_url, &http.get(feed_url)?)
}

/// Feed URLs from a feeds file: one per line, `#` starts a comment.
pub fn parse_feed_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SyncError {
    pub url: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SyncReport {
    pub added: usize,
    pub skipped: usize,
    pub errors: Vec<SyncError>,
}

/// Pulls every feed and stores articles not yet in the store. Failures on a
/// feed or an article are recorded and the run carries on.
pub fn sync(
    store: &mut CorpusStore,
    feeds: &[String],
    http: &dyn HttpClient,
    params: &TilingParams,
) -> Result<SyncReport, IngestError> {
    let mut report = SyncReport::default();
    let mut record = |url: &str, e: IngestError| {
        log::warn!("ingest: {url}: {e}");
        report.errors.push(SyncError { url: url.to_string(), message: e.to_string() });
    };
    let mut added = 0;
    let mut skipped = 0;
    for feed_url in feeds {
        let refs = match fetch_feed(feed_url, http) {
            Ok(r) => r,
            Err(e) => {
                record(feed_url, e);
                continue;
            }
        };
        for r in refs {
            if store.contains_url(&r.article_url) {
                skipped += 1;
                continue;
            }
            let doc = http
                .get(&r.article_url)
                .and_then(|html| extract_article(&html))
                .and_then(|text| {
                    Ok(Document::new(doc_id_for(&r.article_url), text, Some(r.article_url.clone()), params)?)
                });
            match doc {
                Ok(doc) => match store.put(&doc) {
                    Ok(()) => added += 1,
                    // a store failure is not per-article; stop here
                    Err(e) => return Err(e),
                },
                Err(e) => record(&r.article_url, e),
            }
        }
    }
    report.added = added;
    report.skipped = skipped;
    Ok(report)
}
