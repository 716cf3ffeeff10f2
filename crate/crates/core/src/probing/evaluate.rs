use serde::{Deserialize, Serialize};

use super::submit::Submitter;
use super::ProbeError;
use crate::form_model::{url_for, Binding, FormSpec, QueryTemplate};
use crate::surfacer::PageSignature;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateEvaluation {
    pub template: QueryTemplate,
    /// Samples whose page was fetched.
    pub submissions: usize,
    pub failures: usize,
    pub distinct_signatures: usize,
    pub result_counts: Vec<usize>,
}

pub fn is_near_duplicate(a: &PageSignature, b: &PageSignature, threshold: f64) -> bool {
    a.similarity(b) >= threshold
}

/// Number of signatures left after collapsing near-duplicates onto the first
/// representative seen.
pub fn count_distinct<'a, I>(signatures: I, threshold: f64) -> usize
where
    I: IntoIterator<Item = &'a PageSignature>,
{
    let mut reps: Vec<&PageSignature> = Vec::new();
    for s in signatures {
        if !reps.iter().any(|r| is_near_duplicate(r, s, threshold)) {
            reps.push(s);
        }
    }
    reps.len()
}

/// Submits every sample binding and counts distinct result pages.
pub fn evaluate_template(
    submitter: &mut Submitter<'_>,
    form: &FormSpec,
    template: &QueryTemplate,
    samples: &[Binding],
    near_duplicate: f64,
) -> Result<TemplateEvaluation, ProbeError> {
    let mut pages = Vec::new();
    let mut failures = 0;
    for b in samples {
        let url = url_for(form, &template.fixed().merged(b))?;
        match submitter.submit(&url) {
            Some(p) => pages.push(p),
            None => failures += 1,
        }
    }
    if samples.is_empty() || pages.len() * 2 < samples.len() {
        return Err(ProbeError::EvaluationInconclusive {
            template: template.to_string(),
            succeeded: pages.len(),
            attempted: samples.len(),
        });
    }
    Ok(TemplateEvaluation {
        template: template.clone(),
        submissions: pages.len(),
        failures,
        distinct_signatures: count_distinct(pages.iter().map(|p| &p.signature), near_duplicate),
        result_counts: pages.iter().map(|p| p.result_count()).collect(),
    })
}

pub fn is_informative(eval: &TemplateEvaluation, tau: f64) -> bool {
    eval.submissions > 0 && eval.distinct_signatures as f64 / eval.submissions as f64 >= tau
}

pub fn indexable(result_count: usize, page_limit: usize) -> bool {
    (1..=page_limit).contains(&result_count)
}

/// A count that is indexable and provably not truncated by the page limit.
pub fn certified_count(result_count: usize, page_limit: usize) -> bool {
    result_count >= 1 && result_count < page_limit
}
