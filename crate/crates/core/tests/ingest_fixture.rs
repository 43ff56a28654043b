use std::fs;
use std::path::PathBuf;

use cyents::ingest::{
    extract_article, fetch_feed, parse_feed_list, sync, CorpusStore, FixtureHttp, HttpClient, IngestError,
};
use cyents::text::TilingParams;

fn web_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/web")
}

fn http() -> FixtureHttp {
    FixtureHttp::new(web_dir())
}

#[test]
fn rss_and_atom_feeds() {
    let rss = fetch_feed("https://blog.example.com/feed.xml", &http()).unwrap();
    let urls: Vec<&str> = rss.iter().map(|r| r.article_url.as_str()).collect();
    assert_eq!(
        urls,
        [
            "https://blog.example.com/2021/lazarus-wannacry",
            "https://blog.example.com/2021/apt28-x-agent",
            "https://blog.example.com/2021/emotet-returns"
        ]
    );
    assert_eq!(rss[0].title, "Lazarus and the WannaCry outbreak revisited");
    assert!(rss.iter().all(|r| r.feed_url == "https://blog.example.com/feed.xml" && r.published.is_some()));

    let atom = fetch_feed("https://research.example.org/atom.xml", &http()).unwrap();
    assert_eq!(atom.len(), 2);
    assert_eq!(atom[1].article_url, "https://research.example.org/posts/sandworm-industroyer");
    assert_eq!(atom[1].published.as_deref(), Some("2022-04-12T16:45:00Z"));
}

#[test]
fn feed_errors() {
    assert!(fetch_feed("https://empty.example.com/feed.xml", &http()).unwrap().is_empty());
    assert!(matches!(
        fetch_feed("https://broken.example.com/feed.xml", &http()),
        Err(IngestError::FeedParse { .. })
    ));
    assert!(matches!(fetch_feed("https://nowhere.example.com/feed", &http()), Err(IngestError::Network { .. })));
}

#[test]
fn vendor_blog_golden() {
    let html = http().get("https://blog.example.com/2021/lazarus-wannacry").unwrap();
    let golden = fs::read_to_string(web_dir().join("golden_lazarus-wannacry.txt")).unwrap();
    let text = extract_article(&html).unwrap();
    assert_eq!(text, golden.trim_end());
    assert!(!text.contains("Subscribe") && !text.contains("Related") && !text.contains("rights reserved"));
}

fn feeds_file() -> Vec<String> {
    parse_feed_list(&fs::read_to_string(web_dir().join("feeds.txt")).unwrap())
}

#[test]
fn sync_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = CorpusStore::open(dir.path()).unwrap();
    let feeds = vec!["https://blog.example.com/feed.xml".to_string()];
    let params = TilingParams::default();

    let first = sync(&mut store, &feeds, &http(), &params).unwrap();
    assert_eq!((first.added, first.skipped, first.errors.len()), (3, 0, 0));
    let second = sync(&mut store, &feeds, &http(), &params).unwrap();
    assert_eq!((second.added, second.skipped, second.errors.len()), (0, 3, 0));

    let reopened = CorpusStore::open(dir.path()).unwrap();
    let corpus = reopened.load_corpus().unwrap();
    assert_eq!(corpus.len(), 3);
    assert_eq!(reopened.index().len(), 3);
    for (id, doc) in &corpus {
        assert!(!doc.text().contains('\n'));
        assert!(!doc.sentences().is_empty() && !doc.paragraphs().is_empty());
        assert_eq!(reopened.index()[doc.source_url.as_deref().unwrap()], *id);
    }
    for entry in fs::read_dir(dir.path().join("docs")).unwrap() {
        let raw = fs::read_to_string(entry.unwrap().path()).unwrap();
        assert_eq!(raw.matches('\n').count(), 1);
    }
}

#[test]
fn sync_records_a_missing_article() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = CorpusStore::open(dir.path()).unwrap();
    let feeds = vec!["https://news.example.net/rss".to_string()];
    let report = sync(&mut store, &feeds, &http(), &TilingParams::default()).unwrap();
    assert_eq!(report.added, 2);
    assert_eq!(report.errors.len(), 1);
    assert_eq!(report.errors[0].url, "https://news.example.net/c");
}

#[test]
fn sync_from_feeds_file_mixes_formats_and_survives_bad_feeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = CorpusStore::open(dir.path()).unwrap();
    let mut feeds = feeds_file();
    assert_eq!(feeds.len(), 2);
    feeds.push("https://broken.example.com/feed.xml".into());
    let report = sync(&mut store, &feeds, &http(), &TilingParams::default()).unwrap();
    assert_eq!(report.added, 5);
    assert_eq!(report.errors.len(), 1);
    assert_eq!(report.errors[0].url, "https://broken.example.com/feed.xml");
}
