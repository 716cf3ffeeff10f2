//! Result-count estimation from repeated page structure.

use ego_tree::NodeRef;
use scraper::{ElementRef, Html, Node};

use crate::text::{collapse_whitespace, collect_text};

pub(crate) struct ResultItems {
    pub count: usize,
    pub texts: Vec<String>,
}

/// Size of the largest group of sibling elements with the same tag and
/// class list. A lone list item or table row counts as one result; pages
/// without any repetition report zero.
pub fn estimate_result_count(html: &str) -> usize {
    result_items(&Html::parse_document(html)).count
}

pub(crate) fn result_items(doc: &Html) -> ResultItems {
    let mut best: Vec<ElementRef<'_>> = Vec::new();
    let mut lone_item: Option<ElementRef<'_>> = None;
    for node in doc.tree.root().descendants() {
        let Some(parent) = ElementRef::wrap(node) else {
            continue;
        };
        if lone_item.is_none() && matches!(parent.value().name(), "li" | "tr") && has_text(*parent)
        {
            lone_item = Some(parent);
        }
        // Groups keyed by (tag, class list), in first-appearance order.
        let mut groups: Vec<(String, Vec<ElementRef<'_>>)> = Vec::new();
        for child in parent.child_elements() {
            if !has_text(*child) {
                continue;
            }
            let key = structural_key(child);
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, members)) => members.push(child),
                None => groups.push((key, vec![child])),
            }
        }
        for (_, members) in groups {
            if members.len() > best.len() {
                best = members;
            }
        }
    }
    let chosen: Vec<ElementRef<'_>> = if best.len() >= 2 {
        best
    } else {
        lone_item.into_iter().collect()
    };
    ResultItems {
        count: chosen.len(),
        texts: chosen.iter().map(|e| element_text(*e)).collect(),
    }
}

fn structural_key(el: ElementRef<'_>) -> String {
    let mut classes: Vec<&str> = el.value().classes().collect();
    classes.sort_unstable();
    format!("{}.{}", el.value().name(), classes.join("."))
}

fn element_text(el: ElementRef<'_>) -> String {
    let mut out = String::new();
    collect_text(*el, &mut out);
    collapse_whitespace(&out)
}

fn has_text(node: NodeRef<'_, Node>) -> bool {
    node.descendants().any(|n| match n.value() {
        Node::Text(t) => !t.trim().is_empty(),
        _ => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(n: usize) -> String {
        let items: String = (0..n)
            .map(|i| format!(r#"<li class="record" data-record-id="{i}">item number {i}</li>"#))
            .collect();
        format!(r#"<html><body><h1>Results</h1><ul class="results">{items}</ul></body></html>"#)
    }

    #[test]
    fn counts_uniform_list_items() {
        assert_eq!(estimate_result_count(&list(10)), 10);
        assert_eq!(estimate_result_count(&list(7)), 7);
    }

    #[test]
    fn single_list_item_counts_as_one() {
        assert_eq!(estimate_result_count(&list(1)), 1);
    }

    #[test]
    fn no_results_page_is_zero() {
        let html = r#"<html><body><h1>Results</h1><p class="no-results">No results found</p></body></html>"#;
        assert_eq!(estimate_result_count(html), 0);
    }

    #[test]
    fn ignores_empty_siblings() {
        let html = "<div><br><br><br><span>a</span></div>";
        assert_eq!(estimate_result_count(html), 0);
    }
}
