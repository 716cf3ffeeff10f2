//! Deep-web surfacing engine.
//!
//! Analyzes HTML forms, selects a compact set of GET form submissions that
//! expose the records behind them, and checks itself against a deterministic
//! deep-web site simulator with exact ground truth. Corpus statistics over
//! collected forms back a small set of schema services (synonyms, values for
//! an attribute, schema auto-complete).

pub mod aggregate;
pub mod cli;
pub mod config;
pub mod form_model;
pub mod probing;
pub mod semantics;
pub mod simulator;
pub mod surfacer;
pub mod text;

pub use form_model::{Binding, FormInput, FormSpec, InputKind, Method, QueryTemplate};
pub use probing::{SurfacingPlan, TemplateEvaluation};
pub use semantics::{CorrelationPattern, InputType, TypeTag};
pub use simulator::{Site, SiteKind, SiteSpec};
pub use surfacer::{FetchPolicy, PageSignature, SurfacingReport};
