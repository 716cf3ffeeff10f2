//! Template selection: builds candidate dimensions, keeps informative
//! templates, and expands them into indexable bindings.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::evaluate::{certified_count, evaluate_template, is_informative, TemplateEvaluation};
use super::keywords::{scored_seed_keywords, Background};
use super::state::{
    probe_iterate, probe_pairs, select_keywords, select_keywords_with_predictions, ProbeState,
    ProbeTarget,
};
use super::submit::Submitter;
use super::ProbeError;
use crate::form_model::{
    candidate_inputs, url_for, Binding, FormError, FormSpec, InputKind, Method, QueryTemplate,
};
use crate::semantics::{
    parse_numeric, range_bindings, CorrelationKind, CorrelationPattern, InputType, TypeLexicon,
    TypeTag,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Seed keywords taken from the site's own pages.
    pub seeds: usize,
    pub rounds: usize,
    pub per_round: usize,
    /// Submissions allowed per probed text box.
    pub budget: usize,
    /// Fixed keyword cap; when absent it scales with the estimated number of
    /// reachable records.
    pub keyword_cap: Option<usize>,
    /// Spend leftover budget on two-keyword queries.
    pub pairs: bool,
    /// Also emit unsubmitted words whose estimated match count is below this
    /// fraction of the page limit; 0 disables.
    pub predict_margin: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            seeds: 25,
            rounds: 5,
            per_round: 20,
            budget: 100,
            keyword_cap: None,
            pairs: true,
            predict_margin: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub probe: ProbeConfig,
    pub tau: f64,
    pub max_dims: usize,
    pub samples: usize,
    pub near_duplicate: f64,
    /// Results a single page lists.
    pub page_limit: usize,
    /// Lexicon values used for a typed text box.
    pub typed_values: usize,
    /// Templates with a larger cross product are not considered.
    pub max_template_urls: usize,
    pub seed: u64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            probe: ProbeConfig::default(),
            tau: 0.2,
            max_dims: 3,
            samples: 10,
            near_duplicate: 0.95,
            page_limit: 10,
            typed_values: 50,
            max_template_urls: 10_000,
            seed: 0,
        }
    }
}

pub struct PlanContext<'a> {
    pub background: &'a Background,
    /// Text of pages already known from the site, used for seed keywords.
    pub seed_docs: &'a [String],
    pub lexicon: &'a TypeLexicon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DimensionKind {
    Select,
    Keywords,
    Typed(TypeTag),
    Range,
    DbSelection,
}

/// One query dimension: the inputs it sets and its value set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dimension {
    pub kind: DimensionKind,
    pub positions: Vec<usize>,
    pub values: Vec<Binding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedTemplate {
    pub form_action: String,
    pub template: QueryTemplate,
    pub dims: Vec<String>,
    pub evaluation: TemplateEvaluation,
    pub bindings: Vec<Binding>,
    /// URL of each binding, in the same order.
    pub urls: Vec<String>,
}

/// One surfaced URL, as written to a plan file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub url: String,
    pub form_action: String,
    pub template_dims: Vec<String>,
    pub binding: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_result_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurfacingPlan {
    pub templates: Vec<PlannedTemplate>,
    pub entries: Vec<PlanEntry>,
    /// Selected keywords per probed box, keyed by input name and any fixed
    /// category (`q[section=music]`).
    pub keyword_sets: BTreeMap<String, Vec<String>>,
    pub projected_url_count: usize,
    pub truncated: bool,
}

impl SurfacingPlan {
    pub fn urls(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.url.as_str()).collect()
    }

    /// Appends `other`, dropping URLs already present.
    pub fn merge(&mut self, other: SurfacingPlan) {
        let mut seen: BTreeSet<String> = self.entries.iter().map(|e| e.url.clone()).collect();
        for mut t in other.templates {
            let (bindings, urls): (Vec<Binding>, Vec<String>) = t
                .bindings
                .into_iter()
                .zip(t.urls)
                .filter(|(_, u)| !seen.contains(u))
                .unzip();
            t.bindings = bindings;
            t.urls = urls;
            self.templates.push(t);
        }
        for e in other.entries {
            if seen.insert(e.url.clone()) {
                self.entries.push(e);
            }
        }
        self.keyword_sets.extend(other.keyword_sets);
        self.truncated |= other.truncated;
        self.projected_url_count = self.templates.iter().map(|t| t.bindings.len()).sum();
    }
}

/// Builds the plan for one GET form.
pub fn select_plan(
    submitter: &mut Submitter<'_>,
    form: &FormSpec,
    types: &BTreeMap<usize, InputType>,
    correlations: &[CorrelationPattern],
    ctx: &PlanContext<'_>,
    config: &PlanConfig,
) -> Result<SurfacingPlan, ProbeError> {
    if form.method == Method::Post {
        return Err(FormError::MethodNotSurfaceable(form.action.clone()).into());
    }
    let mut keyword_sets = BTreeMap::new();
    let dims = build_dimensions(
        submitter,
        form,
        types,
        correlations,
        ctx,
        config,
        &mut keyword_sets,
    );

    let mut evaluated: BTreeMap<Vec<usize>, Option<TemplateEvaluation>> = BTreeMap::new();
    let mut frontier: Vec<Vec<usize>> = Vec::new();
    for i in 0..dims.len() {
        let combo = vec![i];
        if let Some(e) = evaluate_combo(submitter, form, &dims, &combo, config) {
            if is_informative(&e, config.tau) {
                frontier.push(combo.clone());
            }
            evaluated.insert(combo, Some(e));
        }
    }
    if frontier.is_empty() {
        return Err(ProbeError::NoInformativeTemplate(form.action.clone()));
    }
    let mut kept = frontier.clone();
    for _ in 1..config.max_dims {
        let mut next = BTreeSet::new();
        for t in &frontier {
            for d in 0..dims.len() {
                if t.contains(&d) || t.iter().any(|&o| overlaps(&dims[o], &dims[d])) {
                    continue;
                }
                let mut combo = t.clone();
                combo.push(d);
                combo.sort_unstable();
                if evaluated.contains_key(&combo)
                    || cross_size(&dims, &combo) > config.max_template_urls
                {
                    continue;
                }
                let e = evaluate_combo(submitter, form, &dims, &combo, config);
                if e.as_ref().is_some_and(|e| is_informative(e, config.tau)) {
                    next.insert(combo.clone());
                }
                evaluated.insert(combo, e);
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next.into_iter().collect();
        kept.extend(frontier.iter().cloned());
    }

    let mut plan = SurfacingPlan {
        keyword_sets,
        ..SurfacingPlan::default()
    };
    let mut emitted = BTreeSet::new();
    for combo in kept {
        let Some(Some(evaluation)) = evaluated.remove(&combo) else {
            continue;
        };
        let size = cross_size(&dims, &combo);
        if size > config.max_template_urls {
            log::warn!("{}: skipping template with {size} bindings", form.action);
            continue;
        }
        let observed = evaluation.result_counts.len();
        let good = evaluation
            .result_counts
            .iter()
            .filter(|&&c| certified_count(c, config.page_limit))
            .count();
        let keep_unobserved = observed > 0 && good * 2 >= observed;
        let template = template_of(&dims, &combo);
        let names = dim_names(form, &template);
        let mut bindings = Vec::new();
        let mut urls = Vec::new();
        for idx in 0..size {
            let b = binding_at(&dims, &combo, idx);
            let url = url_for(form, &b)?;
            let count = submitter.observed(&url).map(|p| p.result_count());
            let keep = match count {
                Some(c) => certified_count(c, config.page_limit),
                None => keep_unobserved,
            };
            if !keep || !emitted.insert(url.clone()) {
                continue;
            }
            urls.push(url.clone());
            plan.entries.push(PlanEntry {
                url,
                form_action: form.action.clone(),
                template_dims: names.clone(),
                binding: b
                    .assignments()
                    .iter()
                    .map(|(p, v)| (form.inputs[*p].name.clone(), v.clone()))
                    .collect(),
                estimated_result_count: count,
            });
            bindings.push(b);
        }
        plan.templates.push(PlannedTemplate {
            form_action: form.action.clone(),
            template,
            dims: names,
            evaluation,
            bindings,
            urls,
        });
    }
    plan.projected_url_count = plan.templates.iter().map(|t| t.bindings.len()).sum();
    plan.truncated = submitter.exhausted();
    Ok(plan)
}

#[allow(clippy::too_many_arguments)]
fn build_dimensions(
    submitter: &mut Submitter<'_>,
    form: &FormSpec,
    types: &BTreeMap<usize, InputType>,
    correlations: &[CorrelationPattern],
    ctx: &PlanContext<'_>,
    config: &PlanConfig,
    keyword_sets: &mut BTreeMap<String, Vec<String>>,
) -> Vec<Dimension> {
    let mut dims = Vec::new();
    let mut claimed = BTreeSet::new();
    for c in correlations {
        let (a, b) = c.members;
        if claimed.contains(&a) || claimed.contains(&b) {
            continue;
        }
        let dim = match c.kind {
            CorrelationKind::RangePair => range_dimension(form, a, b),
            CorrelationKind::DbSelection => Some(db_selection_dimension(
                submitter,
                form,
                a,
                b,
                ctx,
                config,
                keyword_sets,
            )),
        };
        if let Some(d) = dim {
            claimed.extend([a, b]);
            dims.push(d);
        }
    }
    for input in candidate_inputs(form) {
        let pos = input.position;
        if claimed.contains(&pos) {
            continue;
        }
        let single = |kind, values: Vec<String>| Dimension {
            kind,
            positions: vec![pos],
            values: values
                .into_iter()
                .map(|v| Binding::from_pairs([(pos, v)]))
                .collect(),
        };
        let dim = match input.kind {
            InputKind::SelectMenu | InputKind::RadioGroup | InputKind::Checkbox => Some(single(
                DimensionKind::Select,
                input
                    .offered_values
                    .iter()
                    .filter(|v| !v.trim().is_empty())
                    .cloned()
                    .collect(),
            )),
            InputKind::TextBox => match types.get(&pos).map(|t| t.tag) {
                Some(TypeTag::GenericSearch) => {
                    let target = ProbeTarget {
                        input: pos,
                        fixed: Binding::new(),
                    };
                    let kws = probe_keywords(submitter, form, &target, ctx, config);
                    keyword_sets.insert(input.name.clone(), kws.clone());
                    Some(single(DimensionKind::Keywords, kws))
                }
                Some(tag) if tag.is_typed() => {
                    let seeds = ctx.lexicon.seeds(tag);
                    let k = config.typed_values.min(seeds.len());
                    let values = (0..k).map(|i| seeds[i * seeds.len() / k].clone()).collect();
                    Some(single(DimensionKind::Typed(tag), values))
                }
                _ => None,
            },
            InputKind::Hidden => None,
        };
        if let Some(d) = dim.filter(|d| !d.values.is_empty()) {
            dims.push(d);
        }
    }
    dims
}

fn range_dimension(form: &FormSpec, min: usize, max: usize) -> Option<Dimension> {
    let mut values: Vec<(f64, String)> = Vec::new();
    for p in [min, max] {
        for v in &form.inputs[p].offered_values {
            if let Some(n) = parse_numeric(v) {
                if !values.iter().any(|(m, _)| *m == n) {
                    values.push((n, v.clone()));
                }
            }
        }
    }
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values: Vec<String> = values.into_iter().map(|(_, v)| v).collect();
    let buckets = range_bindings(&values).ok()?;
    Some(Dimension {
        kind: DimensionKind::Range,
        positions: vec![min, max],
        values: buckets
            .into_iter()
            .map(|(lo, hi)| Binding::from_pairs([(min, lo), (max, hi)]))
            .collect(),
    })
}

fn db_selection_dimension(
    submitter: &mut Submitter<'_>,
    form: &FormSpec,
    select: usize,
    text: usize,
    ctx: &PlanContext<'_>,
    config: &PlanConfig,
    keyword_sets: &mut BTreeMap<String, Vec<String>>,
) -> Dimension {
    let mut values = Vec::new();
    let sel = &form.inputs[select];
    for v in sel.offered_values.iter().filter(|v| !v.trim().is_empty()) {
        let target = ProbeTarget {
            input: text,
            fixed: Binding::from_pairs([(select, v.clone())]),
        };
        let kws = probe_keywords(submitter, form, &target, ctx, config);
        for k in &kws {
            values.push(target.binding_for(k));
        }
        keyword_sets.insert(
            format!("{}[{}={}]", form.inputs[text].name, sel.name, v),
            kws,
        );
    }
    Dimension {
        kind: DimensionKind::DbSelection,
        positions: vec![select, text],
        values,
    }
}

/// Runs probing rounds for one text box and returns the selected keywords.
pub(crate) fn probe_keywords(
    submitter: &mut Submitter<'_>,
    form: &FormSpec,
    target: &ProbeTarget,
    ctx: &PlanContext<'_>,
    config: &PlanConfig,
) -> Vec<String> {
    let p = &config.probe;
    let seeds = match scored_seed_keywords(ctx.seed_docs, ctx.background, p.seeds) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("{}: {e}", form.action);
            return Vec::new();
        }
    };
    let mut state = ProbeState::new(seeds, p.budget, config.page_limit, config.near_duplicate);
    for _ in 0..p.rounds {
        if state.budget_left() == 0 || submitter.exhausted() {
            break;
        }
        let round = probe_iterate(
            submitter,
            form,
            target,
            &mut state,
            p.per_round,
            ctx.background,
        );
        if round.submitted == 0 || round.new_signatures == 0 {
            break;
        }
    }
    while p.pairs && state.budget_left() > 0 && !submitter.exhausted() {
        let round = probe_pairs(submitter, form, target, &mut state, p.per_round);
        if round.submitted == 0 || round.new_signatures == 0 {
            break;
        }
    }
    let cap = p.keyword_cap.unwrap_or_else(|| {
        let scaled =
            (3.0 * state.estimated_population() / config.page_limit.max(1) as f64).ceil() as usize;
        scaled.max(50)
    });
    log::info!(
        "{}: probed {} keywords with {} submissions, {} distinct pages, {} items seen, ~{:.0} reachable",
        form.inputs[target.input].name,
        state.tried.len(),
        state.submissions_used,
        state.distinct_pages().len(),
        state.distinct_items_seen(),
        state.estimated_population()
    );
    if p.predict_margin > 0.0 {
        select_keywords_with_predictions(&state, cap, p.predict_margin)
    } else {
        select_keywords(&state, cap)
    }
}

fn overlaps(a: &Dimension, b: &Dimension) -> bool {
    a.positions.iter().any(|p| b.positions.contains(p))
}

fn cross_size(dims: &[Dimension], combo: &[usize]) -> usize {
    combo
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(dims[d].values.len()))
        .unwrap_or(usize::MAX)
}

/// Mixed-radix decoding of `idx` into one value per dimension; the last
/// dimension varies fastest.
fn binding_at(dims: &[Dimension], combo: &[usize], mut idx: usize) -> Binding {
    let mut parts = Vec::with_capacity(combo.len());
    for &d in combo.iter().rev() {
        let n = dims[d].values.len();
        parts.push(&dims[d].values[idx % n]);
        idx /= n;
    }
    parts
        .into_iter()
        .rev()
        .fold(Binding::new(), |acc, b| acc.merged(b))
}

fn template_of(dims: &[Dimension], combo: &[usize]) -> QueryTemplate {
    let positions: BTreeSet<usize> = combo
        .iter()
        .flat_map(|&d| dims[d].positions.iter().copied())
        .collect();
    QueryTemplate::new(positions, Binding::new()).expect("dimensions are non-empty")
}

fn dim_names(form: &FormSpec, template: &QueryTemplate) -> Vec<String> {
    template
        .dimensions()
        .iter()
        .map(|&p| form.inputs[p].name.clone())
        .collect()
}

fn evaluate_combo(
    submitter: &mut Submitter<'_>,
    form: &FormSpec,
    dims: &[Dimension],
    combo: &[usize],
    config: &PlanConfig,
) -> Option<TemplateEvaluation> {
    let size = cross_size(dims, combo);
    if size == 0 || size > config.max_template_urls {
        return None;
    }
    let k = config.samples.min(size);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ combo_hash(combo));
    let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, size, k).into_vec();
    picks.sort_unstable();
    let samples: Vec<Binding> = picks
        .into_iter()
        .map(|i| binding_at(dims, combo, i))
        .collect();
    let template = template_of(dims, combo);
    match evaluate_template(submitter, form, &template, &samples, config.near_duplicate) {
        Ok(e) => {
            log::debug!(
                "{} {}: {}/{} distinct",
                form.action,
                template,
                e.distinct_signatures,
                e.submissions
            );
            Some(e)
        }
        Err(e) => {
            log::warn!("{e}");
            None
        }
    }
}

fn combo_hash(combo: &[usize]) -> u64 {
    let bytes: Vec<u8> = combo
        .iter()
        .flat_map(|d| (*d as u64).to_le_bytes())
        .collect();
    xxhash_rust::xxh64::xxh64(&bytes, 0)
}

/// URLs of every single- and multi-input binding over the non-empty offered
/// values of `positions`, each input varied independently.
pub fn independent_enumeration(
    form: &FormSpec,
    positions: &[usize],
) -> Result<Vec<String>, FormError> {
    let domains: Vec<Vec<&String>> = positions
        .iter()
        .map(|&p| {
            form.inputs[p]
                .offered_values
                .iter()
                .filter(|v| !v.trim().is_empty())
                .collect()
        })
        .collect();
    let mut urls = Vec::new();
    for mask in 1usize..(1 << positions.len()) {
        let chosen: Vec<usize> = (0..positions.len())
            .filter(|i| mask & (1 << i) != 0)
            .collect();
        let total: usize = chosen.iter().map(|&i| domains[i].len()).product();
        for mut idx in 0..total {
            let mut b = Binding::new();
            for &i in chosen.iter().rev() {
                let n = domains[i].len();
                b.set(positions[i], domains[i][idx % n].clone());
                idx /= n;
            }
            urls.push(url_for(form, &b)?);
        }
    }
    Ok(urls)
}

pub fn write_plan_jsonl<W: Write>(plan: &SurfacingPlan, mut out: W) -> std::io::Result<()> {
    for e in &plan.entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_plan_jsonl<R: BufRead>(input: R) -> Result<Vec<PlanEntry>, ProbeError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| ProbeError::PlanFile(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line)
            .map_err(|e| ProbeError::PlanFile(format!("line {}: {e}", n + 1)))?;
        out.push(entry);
    }
    Ok(out)
}
