//! Search-box keyword probing, template evaluation and plan selection.

pub mod evaluate;
pub mod keywords;
pub mod plan;
pub mod state;
pub mod submit;

use thiserror::Error;

use crate::form_model::FormError;

pub use evaluate::{
    certified_count, count_distinct, evaluate_template, indexable, is_informative,
    is_near_duplicate, TemplateEvaluation,
};
pub use keywords::{scored_seed_keywords, seed_keywords, Background};
pub use plan::{
    independent_enumeration, read_plan_jsonl, select_plan, write_plan_jsonl, PlanConfig,
    PlanContext, PlanEntry, PlannedTemplate, ProbeConfig, SurfacingPlan,
};
pub use state::{
    predicted_keywords, probe_iterate, probe_pairs, select_keywords,
    select_keywords_with_predictions, KeywordOutcome, ProbeState, ProbeTarget, RoundSummary,
};
pub use submit::{ObservedPage, Submitter};

#[derive(Debug, Error, PartialEq)]
pub enum ProbeError {
    #[error("seed documents contain no usable tokens")]
    NoSeedText,
    #[error("background table: {0}")]
    Background(String),
    #[error("template {template}: only {succeeded} of {attempted} samples fetched")]
    EvaluationInconclusive {
        template: String,
        succeeded: usize,
        attempted: usize,
    },
    #[error("no informative template for form {0}")]
    NoInformativeTemplate(String),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("plan file: {0}")]
    PlanFile(String),
}
