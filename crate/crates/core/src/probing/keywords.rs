use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::ProbeError;
use crate::text::keyword_tokens;

const BUNDLED: &str = include_str!("../../data/background_en.txt");

/// Word frequencies of a general background corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    counts: HashMap<String, u64>,
    total: u64,
}

impl Background {
    /// Small general-English table shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled background parses")
    }

    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let counts: HashMap<String, u64> = counts
            .into_iter()
            .map(|(w, c)| (w.into().to_lowercase(), c))
            .collect();
        let total = counts.values().sum();
        Self { counts, total }
    }

    /// Parses `word<whitespace>count` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, ProbeError> {
        let mut counts = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(word), Some(count), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(ProbeError::Background(format!(
                    "line {}: expected `word count`",
                    n + 1
                )));
            };
            let count: u64 = count.parse().map_err(|_| {
                ProbeError::Background(format!("line {}: bad count {count:?}", n + 1))
            })?;
            counts.push((word.to_string(), count));
        }
        let bg = Self::from_counts(counts);
        if bg.total == 0 {
            return Err(ProbeError::Background(
                "background table is empty".to_string(),
            ));
        }
        Ok(bg)
    }

    pub fn load(path: &Path) -> Result<Self, ProbeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProbeError::Background(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn frequency(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `ln(B / (1 + bf))`.
    pub fn weight(&self, word: &str) -> f64 {
        (self.total as f64 / (1.0 + self.frequency(word) as f64)).ln()
    }
}

/// Term frequencies of keyword tokens across `docs`.
pub(crate) fn term_frequencies<S: AsRef<str>>(docs: &[S]) -> BTreeMap<String, u64> {
    let mut tf = BTreeMap::new();
    for d in docs {
        for t in keyword_tokens(d.as_ref()) {
            *tf.entry(t).or_insert(0) += 1;
        }
    }
    tf
}

/// Orders by score descending, then keyword ascending.
pub(crate) fn rank(scored: &mut [(String, f64)]) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Top-`n` characteristic words of `docs` with their `tf · ln(B/(1+bf))` scores.
pub fn scored_seed_keywords<S: AsRef<str>>(
    docs: &[S],
    background: &Background,
    n: usize,
) -> Result<Vec<(String, f64)>, ProbeError> {
    let tf = term_frequencies(docs);
    if tf.is_empty() {
        return Err(ProbeError::NoSeedText);
    }
    let mut scored: Vec<(String, f64)> = tf
        .into_iter()
        .map(|(w, f)| {
            let s = f as f64 * background.weight(&w);
            (w, s)
        })
        .collect();
    rank(&mut scored);
    scored.truncate(n);
    Ok(scored)
}

pub fn seed_keywords<S: AsRef<str>>(
    docs: &[S],
    background: &Background,
    n: usize,
) -> Result<Vec<String>, ProbeError> {
    Ok(scored_seed_keywords(docs, background, n)?
        .into_iter()
        .map(|(w, _)| w)
        .collect())
}
