//! Visible-text extraction and tokenization shared by the signature,
//! keyword and classification code.

use ego_tree::NodeRef;
use scraper::{Html, Node};

/// Minimum length of a token usable as a probe keyword.
pub const MIN_KEYWORD_LEN: usize = 3;

/// Visible text of a document: `script`, `style` and `noscript` subtrees
/// dropped, whitespace collapsed to single spaces.
pub fn visible_text(html: &str) -> String {
    let doc = Html::parse_document(html);
    visible_text_of(&doc)
}

pub fn visible_text_of(doc: &Html) -> String {
    let mut out = String::new();
    collect_text(doc.tree.root(), &mut out);
    collapse_whitespace(&out)
}

pub(crate) fn collect_text(node: NodeRef<'_, Node>, out: &mut String) {
    match node.value() {
        Node::Text(t) => {
            out.push_str(t);
            out.push(' ');
        }
        Node::Element(e) if matches!(e.name(), "script" | "style" | "noscript" | "template") => {}
        _ => {
            for child in node.children() {
                collect_text(child, out);
            }
        }
    }
}

pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercased alphanumeric runs.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Tokens eligible as keywords: alphanumeric, at least three characters.
pub fn keyword_tokens(text: &str) -> Vec<String> {
    tokens(text)
        .into_iter()
        .filter(|t| t.chars().count() >= MIN_KEYWORD_LEN)
        .collect()
}
