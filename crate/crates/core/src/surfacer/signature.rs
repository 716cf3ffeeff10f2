//! Min-hash page fingerprints.
//!
//! Visible text is split into lowercase alphanumeric tokens and grouped into
//! overlapping 8-token shingles (a shorter text forms a single shingle).
//! Each shingle is hashed with XXH64 under seeds `0..64`; the signature keeps
//! the per-seed minimum. Two signatures agree on a slot with probability equal
//! to the Jaccard similarity of their shingle sets.

use std::collections::BTreeSet;

use scraper::Html;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh64::xxh64;

use super::count::{result_items, ResultItems};
use crate::text::{tokens, visible_text_of};

pub const NUM_HASHES: usize = 64;
pub const SHINGLE_LEN: usize = 8;
/// Seed used for result-item fingerprints; outside the min-hash seed range.
const ITEM_SEED: u64 = 0x5eed_17e5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSignature {
    pub minhash: Vec<u64>,
    pub estimated_result_count: usize,
    pub empty: bool,
    /// Fingerprints of the listed result items, in page order.
    pub items: Vec<u64>,
}

impl PageSignature {
    /// Estimated Jaccard similarity: fraction of agreeing min-hash slots.
    pub fn similarity(&self, other: &PageSignature) -> f64 {
        match (self.empty, other.empty) {
            (true, true) => return 1.0,
            (true, false) | (false, true) => return 0.0,
            _ => {}
        }
        let agree = self
            .minhash
            .iter()
            .zip(&other.minhash)
            .filter(|(a, b)| a == b)
            .count();
        agree as f64 / NUM_HASHES as f64
    }
}

/// The shingle set of a text, each shingle as its space-joined tokens.
pub fn shingles(text: &str) -> BTreeSet<String> {
    let toks = tokens(text);
    if toks.is_empty() {
        return BTreeSet::new();
    }
    if toks.len() < SHINGLE_LEN {
        return BTreeSet::from([toks.join(" ")]);
    }
    toks.windows(SHINGLE_LEN).map(|w| w.join(" ")).collect()
}

pub fn minhash_of<'a, I>(shingles: I) -> Vec<u64>
where
    I: IntoIterator<Item = &'a String>,
{
    let mut mins = vec![u64::MAX; NUM_HASHES];
    for s in shingles {
        for (seed, slot) in mins.iter_mut().enumerate() {
            let h = xxh64(s.as_bytes(), seed as u64);
            if h < *slot {
                *slot = h;
            }
        }
    }
    mins
}

pub fn item_fingerprint(text: &str) -> u64 {
    xxh64(text.as_bytes(), ITEM_SEED)
}

pub fn signature(html: &str) -> PageSignature {
    let doc = Html::parse_document(html);
    signature_of(&doc)
}

pub(crate) fn signature_of(doc: &Html) -> PageSignature {
    let text = visible_text_of(doc);
    let set = shingles(&text);
    let ResultItems { count, texts } = result_items(doc);
    PageSignature {
        minhash: minhash_of(&set),
        estimated_result_count: count,
        empty: set.is_empty(),
        items: texts.iter().map(|t| item_fingerprint(t)).collect(),
    }
}
