use roxmltree::{Document as Xml, Node};
use serde::{Deserialize, Serialize};

use super::IngestError;

/// One feed entry pointing at an article page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleRef {
    pub feed_url: String,
    pub article_url: String,
    pub title: String,
    /// the feed's own timestamp string, unparsed
    pub published: Option<String>,
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

fn child_text(node: Node, name: &str) -> Option<String> {
    child(node, name).and_then(|c| c.text()).map(|t| t.trim().to_string()).filter(|t| !t.is_empty())
}

fn atom_link(entry: Node) -> Option<String> {
    let links: Vec<Node> = entry.children().filter(|c| c.is_element() && c.tag_name().name() == "link").collect();
    links
        .iter()
        .find(|l| l.attribute("rel").map_or(true, |r| r == "alternate"))
        .or(links.first())
        .and_then(|l| l.attribute("href"))
        .map(str::to_string)
}

/// Parses RSS 2.0 or Atom, keeping feed order. Entries without a link are
/// dropped.
pub fn parse_feed(feed_url: &str, xml: &str) -> Result<Vec<ArticleRef>, IngestError> {
    let doc = Xml::parse(xml).map_err(|e| IngestError::FeedParse { url: feed_url.to_string(), message: e.to_string() })?;
    let root = doc.root_element();
    let mk = |link: Option<String>, title: Option<String>, published: Option<String>| {
        link.map(|article_url| ArticleRef {
            feed_url: feed_url.to_string(),
            article_url,
            title: title.unwrap_or_default(),
            published,
        })
    };
    match root.tag_name().name() {
        "rss" => {
            let channel = child(root, "channel").ok_or_else(|| IngestError::FeedParse {
                url: feed_url.to_string(),
                message: "RSS without <channel>".into(),
            })?;
            Ok(channel
                .children()
                .filter(|c| c.is_element() && c.tag_name().name() == "item")
                .filter_map(|item| {
                    mk(child_text(item, "link"), child_text(item, "title"), child_text(item, "pubDate"))
                })
                .collect())
        }
        "feed" => Ok(root
            .children()
            .filter(|c| c.is_element() && c.tag_name().name() == "entry")
            .filter_map(|e| {
                let when = child_text(e, "published").or_else(|| child_text(e, "updated"));
                mk(atom_link(e), child_text(e, "title"), when)
            })
            .collect()),
        other => Err(IngestError::FeedParse {
            url: feed_url.to_string(),
            message: format!("unknown feed root <{other}>"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rss_items_in_order() {
        let xml = r#"<?xml version="1.0"?><rss version="2.0"><channel><title>t</title>
            <item><title>One</title><link>https://x/1</link><pubDate>Mon, 01 Mar 2021 10:00:00 GMT</pubDate></item>
            <item><title>Two</title><link> https://x/2 </link></item>
            <item><title>No link</title></item>
        </channel></rss>"#;
        let refs = parse_feed("f", xml).unwrap();
        let urls: Vec<&str> = refs.iter().map(|r| r.article_url.as_str()).collect();
        assert_eq!(urls, ["https://x/1", "https://x/2"]);
        assert_eq!(refs[0].published.as_deref(), Some("Mon, 01 Mar 2021 10:00:00 GMT"));
    }

    #[test]
    fn atom_entries() {
        let xml = r#"<feed xmlns="http://www.w3.org/2005/Atom"><title>t</title>
            <entry><title>A</title><link rel="self" href="https://x/self"/><link rel="alternate" href="https://x/a"/><updated>2021-03-01T00:00:00Z</updated></entry>
            <entry><title>B</title><link href="https://x/b"/></entry>
        </feed>"#;
        let refs = parse_feed("f", xml).unwrap();
        assert_eq!(refs.len(), 2);
        assert_eq!(refs[0].article_url, "https://x/a");
        assert_eq!(refs[1].article_url, "https://x/b");
    }

    #[test]
    fn empty_and_malformed() {
        assert!(parse_feed("f", "<rss><channel></channel></rss>").unwrap().is_empty());
        assert!(matches!(parse_feed("f", "<rss><channel>"), Err(IngestError::FeedParse { .. })));
        assert!(matches!(parse_feed("f", "<html/>"), Err(IngestError::FeedParse { .. })));
    }
}
