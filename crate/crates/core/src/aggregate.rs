//! Corpus statistics over collected forms: attribute synonyms, values for an
//! attribute and schema auto-complete.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::form_model::{FormSpec, InputKind};
use crate::semantics::name_tokens;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("stats file: {0}")]
    Format(#[from] serde_json::Error),
}

/// Lowercases and splits on delimiter and camelCase boundaries, rejoining
/// with `_`: `zipCode`, `Zip-Code` and `zip_code` all become `zip_code`.
pub fn normalize_name(name: &str) -> String {
    name_tokens(name).join("_")
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FormCorpusStats {
    /// Forms containing each name.
    pub name_frequency: BTreeMap<String, u64>,
    /// Forms containing both names; stored in both directions.
    pub cooccurrence: BTreeMap<String, BTreeMap<String, u64>>,
    /// Offered values of enumerated inputs, with occurrence counts.
    pub value_sets: BTreeMap<String, BTreeMap<String, u64>>,
    /// `(source_url, action)` of every ingested form.
    seen: BTreeSet<(String, String)>,
}

impl FormCorpusStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forms_ingested(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.name_frequency.is_empty()
    }

    pub fn frequency(&self, name: &str) -> u64 {
        self.name_frequency.get(name).copied().unwrap_or(0)
    }

    pub fn cooccurrence(&self, a: &str, b: &str) -> u64 {
        self.cooccurrence
            .get(a)
            .and_then(|m| m.get(b))
            .copied()
            .unwrap_or(0)
    }

    /// Adds one form. Returns false when a form with the same identity was
    /// already ingested.
    pub fn ingest_form(&mut self, form: &FormSpec) -> bool {
        if !self
            .seen
            .insert((form.source_url.clone(), form.action.clone()))
        {
            return false;
        }
        let mut names = BTreeSet::new();
        for input in form.inputs.iter().filter(|i| i.kind != InputKind::Hidden) {
            let name = normalize_name(&input.name);
            if name.is_empty() {
                continue;
            }
            if input.kind.is_enumerated() {
                let values = self.value_sets.entry(name.clone()).or_default();
                for v in input.offered_values.iter().filter(|v| !v.trim().is_empty()) {
                    *values.entry(v.clone()).or_insert(0) += 1;
                }
            }
            names.insert(name);
        }
        for a in &names {
            *self.name_frequency.entry(a.clone()).or_insert(0) += 1;
            for b in &names {
                if a != b {
                    *self
                        .cooccurrence
                        .entry(a.clone())
                        .or_default()
                        .entry(b.clone())
                        .or_insert(0) += 1;
                }
            }
        }
        true
    }

    /// Reads JSON Lines of forms. Malformed lines are skipped and reported.
    pub fn ingest_jsonl<R: BufRead>(&mut self, input: R) -> Result<Vec<String>, AggregateError> {
        let mut diagnostics = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<FormSpec>(&line) {
                Ok(f) => {
                    self.ingest_form(&f);
                }
                Err(e) => diagnostics.push(format!("line {}: {e}", n + 1)),
            }
        }
        Ok(diagnostics)
    }

    pub fn save(&self, path: &Path) -> Result<(), AggregateError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AggregateError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub fn ingest<'a, I>(forms: I) -> FormCorpusStats
where
    I: IntoIterator<Item = &'a FormSpec>,
{
    let mut stats = FormCorpusStats::new();
    for f in forms {
        stats.ingest_form(f);
    }
    stats
}

fn top_k(mut scored: Vec<(String, f64)>, k: usize) -> Vec<(String, f64)> {
    scored.retain(|(_, s)| *s > 0.0);
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Names used interchangeably with `name`: they share co-occurring
/// neighbours but rarely appear in the same form.
///
/// `score(c) = cos(ctx(a), ctx(c)) · (1 − cooc(a, c) / min(freq(a), freq(c)))`,
/// where context vectors exclude `a` and `c` themselves.
pub fn synonyms(name: &str, stats: &FormCorpusStats, k: usize) -> Vec<(String, f64)> {
    let a = normalize_name(name);
    let freq_a = stats.frequency(&a);
    if freq_a == 0 {
        return Vec::new();
    }
    let empty = BTreeMap::new();
    let ctx_a = stats.cooccurrence.get(&a).unwrap_or(&empty);
    let mut scored = Vec::new();
    for (c, &freq_c) in &stats.name_frequency {
        if *c == a {
            continue;
        }
        let ctx_c = stats.cooccurrence.get(c).unwrap_or(&empty);
        let (mut dot, mut na, mut nc) = (0.0, 0.0, 0.0);
        for (n, &x) in ctx_a {
            if n == c {
                continue;
            }
            na += (x * x) as f64;
            if let Some(&y) = ctx_c.get(n) {
                dot += (x * y) as f64;
            }
        }
        for (n, &y) in ctx_c {
            if *n != a {
                nc += (y * y) as f64;
            }
        }
        if dot == 0.0 {
            continue;
        }
        let cosine = dot / (na.sqrt() * nc.sqrt());
        let direct = stats.cooccurrence(&a, c) as f64 / freq_a.min(freq_c) as f64;
        scored.push((c.clone(), (cosine * (1.0 - direct)).clamp(0.0, 1.0)));
    }
    top_k(scored, k)
}

/// Values seen for `name`, most frequent first.
pub fn values_for(name: &str, stats: &FormCorpusStats) -> Vec<(String, u64)> {
    let mut out: Vec<(String, u64)> = stats
        .value_sets
        .get(&normalize_name(name))
        .map(|m| m.iter().map(|(v, c)| (v.clone(), *c)).collect())
        .unwrap_or_default();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Names likely to accompany `names`, ranked by the mean conditional
/// co-occurrence `cooc(c, g) / freq(g)` over the given names.
pub fn schema_autocomplete<S: AsRef<str>>(
    names: &[S],
    stats: &FormCorpusStats,
    k: usize,
) -> Vec<(String, f64)> {
    let given: BTreeSet<String> = names.iter().map(|n| normalize_name(n.as_ref())).collect();
    if given.is_empty() {
        return Vec::new();
    }
    let scored = stats
        .name_frequency
        .keys()
        .filter(|c| !given.contains(*c))
        .map(|c| {
            let total: f64 = given
                .iter()
                .map(|g| match stats.frequency(g) {
                    0 => 0.0,
                    f => stats.cooccurrence(c, g) as f64 / f as f64,
                })
                .sum();
            (c.clone(), total / given.len() as f64)
        })
        .collect();
    top_k(scored, k)
}
