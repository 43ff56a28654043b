use std::collections::HashMap;

use ego_tree::NodeId;
use scraper::{ElementRef, Html, Node, Selector};

use super::IngestError;
use crate::text::normalize_whitespace;

/// Elements whose content is never article text.
const BOILERPLATE: [&str; 10] = ["script", "style", "noscript", "nav", "header", "footer", "aside", "form", "template", "iframe"];

fn in_boilerplate(el: ElementRef) -> bool {
    el.ancestors()
        .filter_map(ElementRef::wrap)
        .any(|a| BOILERPLATE.contains(&a.value().name()))
}

fn visible_text(el: ElementRef, out: &mut String) {
    for child in el.children() {
        match child.value() {
            Node::Text(t) => {
                out.push_str(t);
            }
            Node::Element(e) if !BOILERPLATE.contains(&e.name()) => {
                if let Some(c) = ElementRef::wrap(child) {
                    if e.name() == "br" {
                        out.push(' ');
                    }
                    visible_text(c, out);
                }
            }
            _ => {}
        }
    }
}

/// Article body text on one line.
///
/// Paragraphs (`<p>`) outside navigation, header, footer, script and similar
/// containers are grouped by their parent element; the parent carrying the
/// most paragraph text is taken as the article body, and its paragraphs are
/// joined in document order with all whitespace collapsed.
pub fn extract_article(html: &str) -> Result<String, IngestError> {
    let doc = Html::parse_document(html);
    let p = Selector::parse("p").expect("static selector");
    let mut groups: HashMap<NodeId, (usize, usize, Vec<String>)> = HashMap::new(); // parent -> (first seen, chars, texts)
    for (i, el) in doc.select(&p).enumerate() {
        if in_boilerplate(el) {
            continue;
        }
        let mut raw = String::new();
        visible_text(el, &mut raw);
        let text = normalize_whitespace(&raw);
        if text.is_empty() {
            continue;
        }
        let Some(parent) = el.parent() else { continue };
        let g = groups.entry(parent.id()).or_insert((i, 0, Vec::new()));
        g.1 += text.chars().count();
        g.2.push(text);
    }
    let best = groups
        .into_values()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .ok_or(IngestError::EmptyExtraction)?;
    Ok(best.2.join(" "))
}
