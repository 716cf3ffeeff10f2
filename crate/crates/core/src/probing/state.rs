//! Iterative keyword probing for search boxes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::keywords::{rank, Background};
use super::submit::{ObservedPage, Submitter};
use super::{certified_count, is_near_duplicate};
use crate::form_model::{url_for, Binding, FormSpec};
use crate::surfacer::PageSignature;
use crate::text::keyword_tokens;

/// Which text box is probed, and the values held fixed meanwhile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeTarget {
    pub input: usize,
    pub fixed: Binding,
}

impl ProbeTarget {
    pub fn binding_for(&self, keyword: &str) -> Binding {
        let mut b = self.fixed.clone();
        b.set(self.input, keyword);
        b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordOutcome {
    /// Candidate score at the time the keyword was submitted.
    pub score: f64,
    /// `None` when the fetch failed.
    pub result_count: Option<usize>,
    /// Fingerprints of listed results, kept only for certified-indexable pages.
    pub covered: Vec<u64>,
    pub new_signature: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistinctPage {
    pub signature: PageSignature,
    pub witness: Binding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeState {
    pub tried: BTreeMap<String, KeywordOutcome>,
    candidates: BTreeMap<String, f64>,
    distinct_pages: Vec<DistinctPage>,
    /// Times each listed result item was seen across probe pages.
    seen_items: BTreeMap<u64, u32>,
    /// Distinct keyword tokens of each listed result item.
    item_tokens: BTreeMap<u64, Vec<String>>,
    pub submissions_used: usize,
    pub budget: usize,
    pub page_limit: usize,
    pub near_duplicate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundSummary {
    pub submitted: usize,
    pub new_signatures: usize,
    pub skipped: usize,
}

impl ProbeState {
    pub fn new(
        seeds: Vec<(String, f64)>,
        budget: usize,
        page_limit: usize,
        near_duplicate: f64,
    ) -> Self {
        Self {
            tried: BTreeMap::new(),
            candidates: seeds.into_iter().collect(),
            distinct_pages: Vec::new(),
            seen_items: BTreeMap::new(),
            item_tokens: BTreeMap::new(),
            submissions_used: 0,
            budget,
            page_limit,
            near_duplicate,
        }
    }

    pub fn budget_left(&self) -> usize {
        self.budget.saturating_sub(self.submissions_used)
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn candidate_score(&self, keyword: &str) -> Option<f64> {
        self.candidates.get(keyword).copied()
    }

    pub fn distinct_pages(&self) -> &[DistinctPage] {
        &self.distinct_pages
    }

    /// Distinct result items listed across all probe pages.
    pub fn distinct_items_seen(&self) -> usize {
        self.seen_items.len()
    }

    /// Bias-corrected Chao1 estimate of the number of records reachable
    /// through the probed box, from how often each listed item recurred.
    pub fn estimated_population(&self) -> f64 {
        let f1 = self.seen_items.values().filter(|&&c| c == 1).count() as f64;
        let f2 = self.seen_items.values().filter(|&&c| c == 2).count() as f64;
        self.seen_items.len() as f64 + f1 * (f1 - 1.0).max(0.0) / (2.0 * (f2 + 1.0))
    }

    /// Up to `k` best untried candidates, ranked by score then keyword.
    fn best_candidates(&self, k: usize) -> Vec<(String, f64)> {
        let mut all: Vec<(String, f64)> = self
            .candidates
            .iter()
            .map(|(w, s)| (w.clone(), *s))
            .collect();
        rank(&mut all);
        all.truncate(k);
        all
    }

    fn record_distinct(&mut self, signature: &PageSignature, witness: &Binding) -> bool {
        if self
            .distinct_pages
            .iter()
            .any(|d| is_near_duplicate(&d.signature, signature, self.near_duplicate))
        {
            return false;
        }
        self.distinct_pages.push(DistinctPage {
            signature: signature.clone(),
            witness: witness.clone(),
        });
        true
    }
}

/// Submits one keyword and records its outcome. Returns the page when it
/// listed results and was not a near-duplicate of an earlier page.
fn submit_keyword(
    submitter: &mut Submitter<'_>,
    form: &FormSpec,
    target: &ProbeTarget,
    state: &mut ProbeState,
    keyword: String,
    score: f64,
    summary: &mut RoundSummary,
) -> Option<Arc<ObservedPage>> {
    let binding = target.binding_for(&keyword);
    let url = url_for(form, &binding).ok()?;
    state.submissions_used += 1;
    summary.submitted += 1;
    let mut outcome = KeywordOutcome {
        score,
        result_count: None,
        covered: Vec::new(),
        new_signature: false,
    };
    let Some(page) = submitter.submit(&url) else {
        summary.skipped += 1;
        state.tried.insert(keyword, outcome);
        return None;
    };
    let count = page.result_count();
    outcome.result_count = Some(count);
    let mut fresh = None;
    if count > 0 {
        for (item, text) in page.signature.items.iter().zip(&page.item_texts) {
            *state.seen_items.entry(*item).or_insert(0) += 1;
            state.item_tokens.entry(*item).or_insert_with(|| {
                let mut t = keyword_tokens(text);
                t.sort_unstable();
                t.dedup();
                t
            });
        }
        if certified_count(count, state.page_limit) {
            outcome.covered = page.signature.items.clone();
        }
        if state.record_distinct(&page.signature, &binding) {
            outcome.new_signature = true;
            summary.new_signatures += 1;
            fresh = Some(page);
        }
    }
    state.tried.insert(keyword, outcome);
    fresh
}

/// One probing round: submits up to `per_round` best candidates, records
/// new distinct result pages and harvests candidate keywords from them.
pub fn probe_iterate(
    submitter: &mut Submitter<'_>,
    form: &FormSpec,
    target: &ProbeTarget,
    state: &mut ProbeState,
    per_round: usize,
    background: &Background,
) -> RoundSummary {
    let mut summary = RoundSummary::default();
    let picks = state.best_candidates(per_round.min(state.budget_left()));
    for (keyword, score) in picks {
        state.candidates.remove(&keyword);
        let Some(page) = submit_keyword(
            submitter,
            form,
            target,
            state,
            keyword.clone(),
            score,
            &mut summary,
        ) else {
            continue;
        };
        let mut tf: BTreeMap<String, u64> = BTreeMap::new();
        for t in keyword_tokens(&page.text) {
            *tf.entry(t).or_insert(0) += 1;
        }
        for (w, f) in tf {
            if w == keyword || state.tried.contains_key(&w) {
                continue;
            }
            *state.candidates.entry(w.clone()).or_insert(0.0) += f as f64 * background.weight(&w);
        }
    }
    summary
}

/// One round of two-keyword probing aimed at results seen only on truncated
/// pages. Each pair joins two keywords whose own pages were truncated; pairs
/// are ranked by how many still-uncovered listed results contain both.
pub fn probe_pairs(
    submitter: &mut Submitter<'_>,
    form: &FormSpec,
    target: &ProbeTarget,
    state: &mut ProbeState,
    per_round: usize,
) -> RoundSummary {
    let covered: BTreeSet<u64> = state
        .tried
        .values()
        .flat_map(|o| o.covered.iter().copied())
        .collect();
    let truncated: BTreeSet<&str> = state
        .tried
        .iter()
        .filter(|(_, o)| o.result_count.is_some_and(|c| c >= state.page_limit))
        .map(|(k, _)| k.as_str())
        .collect();
    let mut scores: BTreeMap<String, usize> = BTreeMap::new();
    for (item, toks) in &state.item_tokens {
        if covered.contains(item) {
            continue;
        }
        let heads: Vec<&String> = toks
            .iter()
            .filter(|t| truncated.contains(t.as_str()))
            .collect();
        for (i, a) in heads.iter().enumerate() {
            for b in &heads[i + 1..] {
                let pair = format!("{a} {b}");
                if !state.tried.contains_key(&pair) {
                    *scores.entry(pair).or_insert(0) += 1;
                }
            }
        }
    }
    let mut ranked: Vec<(String, f64)> = scores.into_iter().map(|(p, n)| (p, n as f64)).collect();
    rank(&mut ranked);
    ranked.truncate(per_round.min(state.budget_left()));
    let mut summary = RoundSummary::default();
    for (pair, score) in ranked {
        submit_keyword(submitter, form, target, state, pair, score, &mut summary);
    }
    summary
}

/// Greedy maximum coverage over the result items of certified pages.
/// Each pick strictly increases coverage; ties prefer the higher probe score,
/// then the lexicographically smaller keyword.
pub fn select_keywords(state: &ProbeState, cap: usize) -> Vec<String> {
    greedy_cover(state.tried.iter().collect(), cap)
}

/// Like [`select_keywords`], with untried words from [`predicted_keywords`]
/// also eligible.
pub fn select_keywords_with_predictions(
    state: &ProbeState,
    cap: usize,
    margin: f64,
) -> Vec<String> {
    let predicted = predicted_keywords(state, margin);
    greedy_cover(state.tried.iter().chain(predicted.iter()).collect(), cap)
}

/// Untried words seen in listed results whose estimated match count stays
/// below `margin · page_limit`. The estimate scales the number of seen items
/// containing the word by estimated reachable records over seen records.
/// Their coverage is the seen items containing them.
pub fn predicted_keywords(state: &ProbeState, margin: f64) -> BTreeMap<String, KeywordOutcome> {
    let seen = state.item_tokens.len();
    if seen == 0 {
        return BTreeMap::new();
    }
    let scale = (state.estimated_population() / seen as f64).max(1.0);
    let mut items_with: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for (item, toks) in &state.item_tokens {
        for t in toks {
            items_with.entry(t.as_str()).or_default().push(*item);
        }
    }
    let limit = margin * state.page_limit as f64;
    items_with
        .into_iter()
        .filter(|(w, items)| !state.tried.contains_key(*w) && (items.len() as f64) * scale < limit)
        .map(|(w, items)| {
            let outcome = KeywordOutcome {
                score: state.candidate_score(w).unwrap_or(0.0),
                result_count: None,
                covered: items,
                new_signature: false,
            };
            (w.to_string(), outcome)
        })
        .collect()
}

fn greedy_cover(mut pool: Vec<(&String, &KeywordOutcome)>, cap: usize) -> Vec<String> {
    pool.retain(|(_, o)| !o.covered.is_empty());
    let mut covered: BTreeSet<u64> = BTreeSet::new();
    let mut picked = Vec::new();
    while picked.len() < cap && !pool.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for (i, (kw, o)) in pool.iter().enumerate() {
            let gain = o.covered.iter().filter(|x| !covered.contains(x)).count();
            let better = match best {
                None => true,
                Some((bi, bg)) => {
                    let (bkw, bo) = pool[bi];
                    gain > bg
                        || (gain == bg
                            && (o.score > bo.score || (o.score == bo.score && *kw < bkw)))
                }
            };
            if better {
                best = Some((i, gain));
            }
        }
        match best {
            Some((i, gain)) if gain > 0 => {
                let (kw, o) = pool.swap_remove(i);
                covered.extend(o.covered.iter().copied());
                picked.push(kw.clone());
            }
            _ => break,
        }
    }
    picked
}
