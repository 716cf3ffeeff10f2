//! Fetching, page fingerprints and end-to-end surfacing of a form site.

pub mod count;
pub mod fetch;
pub mod signature;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use count::estimate_result_count;
pub use fetch::{
    Clock, FakeClock, FetchError, FetchEvent, FetchPolicy, Fetcher, HttpTransport, PageSource,
    SystemClock, Transport,
};
pub use signature::{
    item_fingerprint, minhash_of, shingles, signature, PageSignature, NUM_HASHES, SHINGLE_LEN,
};

use crate::form_model::{parse_forms, url_for, Binding, FormSpec, InputKind, Method};
use crate::probing::{select_plan, Background, PlanConfig, PlanContext, Submitter, SurfacingPlan};
use crate::semantics::{detect_db_selection, detect_range_pairs, Classifier, InputType};
use crate::text::visible_text;

#[derive(Debug, Error, PartialEq)]
pub enum SurfaceError {
    #[error("no forms found at {0}")]
    NoFormsFound(String),
    #[error("fetching {url}: {source}")]
    Fetch { url: String, source: FetchError },
}

pub struct SurfaceOptions {
    pub plan: PlanConfig,
    pub classifier: Classifier,
    pub background: Background,
    /// Confirm text-box types by submitting lexicon values.
    pub probe_types: bool,
}

impl Default for SurfaceOptions {
    fn default() -> Self {
        Self {
            plan: PlanConfig::default(),
            classifier: Classifier::default(),
            background: Background::bundled(),
            probe_types: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSummary {
    pub form_action: String,
    pub dims: Vec<String>,
    pub urls: usize,
    pub submissions: usize,
    pub distinct_signatures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormSummary {
    pub action: String,
    pub method: Method,
    pub types: BTreeMap<String, InputType>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurfacingReport {
    pub urls_emitted: usize,
    pub fetches_made: usize,
    pub skipped_post_forms: usize,
    pub forms: Vec<FormSummary>,
    /// Request issue times in milliseconds, per host, in order.
    pub fetch_timestamps: BTreeMap<String, Vec<f64>>,
    pub fetch_failures: usize,
    pub templates: Vec<TemplateSummary>,
    pub keyword_sets: BTreeMap<String, Vec<String>>,
    pub truncated: bool,
}

/// Surfaces every GET form found on `form_url`.
pub fn surface_site(
    fetcher: &Fetcher,
    form_url: &str,
    options: &SurfaceOptions,
) -> Result<(SurfacingPlan, SurfacingReport), SurfaceError> {
    let html = fetcher
        .fetch(form_url)
        .map_err(|source| SurfaceError::Fetch {
            url: form_url.to_string(),
            source,
        })?;
    let forms = parse_forms(&html, form_url);
    if forms.is_empty() {
        return Err(SurfaceError::NoFormsFound(form_url.to_string()));
    }
    let seed_docs = vec![visible_text(&html)];
    let ctx = PlanContext {
        background: &options.background,
        seed_docs: &seed_docs,
        lexicon: &options.classifier.lexicon,
    };
    let mut submitter = Submitter::new(fetcher);
    let mut plan = SurfacingPlan::default();
    let mut report = SurfacingReport::default();
    for form in &forms {
        if form.method == Method::Post {
            log::info!("skipping POST form {}", form.action);
            report.skipped_post_forms += 1;
            report.forms.push(FormSummary {
                action: form.action.clone(),
                method: form.method,
                types: BTreeMap::new(),
                error: None,
            });
            continue;
        }
        let types = classify_inputs(&mut submitter, form, options);
        let mut correlations = detect_range_pairs(form, &options.classifier.patterns);
        correlations.extend(detect_db_selection(form, &types));
        let outcome = select_plan(
            &mut submitter,
            form,
            &types,
            &correlations,
            &ctx,
            &options.plan,
        );
        let error = match outcome {
            Ok(p) => {
                plan.merge(p);
                None
            }
            Err(e) => {
                log::warn!("{}: {e}", form.action);
                Some(e.to_string())
            }
        };
        report.forms.push(FormSummary {
            action: form.action.clone(),
            method: form.method,
            types: types
                .iter()
                .map(|(p, t)| (form.inputs[*p].name.clone(), *t))
                .collect(),
            error,
        });
    }
    plan.truncated |= submitter.exhausted();
    report.urls_emitted = plan.entries.len();
    report.fetches_made = fetcher.fetches_made();
    report.fetch_timestamps = fetcher.timestamps_by_host();
    report.fetch_failures = submitter.failures().len();
    report.templates = plan
        .templates
        .iter()
        .map(|t| TemplateSummary {
            form_action: t.form_action.clone(),
            dims: t.dims.clone(),
            urls: t.bindings.len(),
            submissions: t.evaluation.submissions,
            distinct_signatures: t.evaluation.distinct_signatures,
        })
        .collect();
    report.keyword_sets = plan.keyword_sets.clone();
    report.truncated = plan.truncated;
    Ok((plan, report))
}

fn classify_inputs(
    submitter: &mut Submitter<'_>,
    form: &FormSpec,
    options: &SurfaceOptions,
) -> BTreeMap<usize, InputType> {
    let mut types = BTreeMap::new();
    for input in form.inputs.iter().filter(|i| i.kind == InputKind::TextBox) {
        let t = if options.probe_types {
            let pos = input.position;
            let mut probe = |value: &str| {
                url_for(form, &Binding::from_pairs([(pos, value)]))
                    .ok()
                    .and_then(|url| submitter.submit(&url))
                    .is_some_and(|p| p.result_count() > 0)
            };
            options.classifier.classify(input, form, Some(&mut probe))
        } else {
            options.classifier.classify(input, form, None)
        };
        types.insert(input.position, t);
    }
    types
}
