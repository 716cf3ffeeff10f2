use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use scraper::Html;

use crate::surfacer::count::result_items;
use crate::surfacer::fetch::{FetchError, PageSource};
use crate::surfacer::signature::signature_of;
use crate::surfacer::PageSignature;
use crate::text::visible_text_of;

/// A fetched result page reduced to what planning needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedPage {
    pub signature: PageSignature,
    pub text: String,
    /// Text of each listed result, parallel to `signature.items`.
    pub item_texts: Vec<String>,
}

impl ObservedPage {
    pub fn from_html(html: &str) -> Self {
        let doc = Html::parse_document(html);
        Self {
            signature: signature_of(&doc),
            text: visible_text_of(&doc),
            item_texts: result_items(&doc).texts,
        }
    }

    pub fn result_count(&self) -> usize {
        self.signature.estimated_result_count
    }
}

/// Page oracle used while planning one form. Each URL is fetched at most
/// once; failures are recorded and not retried. Once the underlying fetcher
/// reports an exhausted budget no further requests are issued.
pub struct Submitter<'a> {
    source: &'a dyn PageSource,
    cache: BTreeMap<String, Arc<ObservedPage>>,
    failed: BTreeSet<String>,
    failures: Vec<(String, FetchError)>,
    exhausted: bool,
    transcript: Vec<String>,
}

impl<'a> Submitter<'a> {
    pub fn new(source: &'a dyn PageSource) -> Self {
        Self {
            source,
            cache: BTreeMap::new(),
            failed: BTreeSet::new(),
            failures: Vec::new(),
            exhausted: false,
            transcript: Vec::new(),
        }
    }

    pub fn submit(&mut self, url: &str) -> Option<Arc<ObservedPage>> {
        if let Some(p) = self.cache.get(url) {
            return Some(Arc::clone(p));
        }
        if self.exhausted || self.failed.contains(url) {
            return None;
        }
        self.transcript.push(url.to_string());
        match self.source.fetch_page(url) {
            Ok(html) => {
                let page = Arc::new(ObservedPage::from_html(&html));
                self.cache.insert(url.to_string(), Arc::clone(&page));
                Some(page)
            }
            Err(e) => {
                if matches!(e, FetchError::FetchBudgetExhausted { .. }) {
                    self.exhausted = true;
                }
                log::debug!("skipping {url}: {e}");
                self.failed.insert(url.to_string());
                self.failures.push((url.to_string(), e));
                None
            }
        }
    }

    /// The cached page for `url`, if it was fetched successfully.
    pub fn observed(&self, url: &str) -> Option<&ObservedPage> {
        self.cache.get(url).map(Arc::as_ref)
    }

    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn failures(&self) -> &[(String, FetchError)] {
        &self.failures
    }

    /// URLs requested from the page source, in order.
    pub fn transcript(&self) -> &[String] {
        &self.transcript
    }
}
