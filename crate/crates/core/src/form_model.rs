//! Normalized HTML form model.
//!
//! Forms are parsed tolerantly into [`FormSpec`] values and bindings are
//! rendered as canonical GET URLs with [`url_for`].

use std::collections::BTreeSet;
use std::fmt;

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

/// Everything except the RFC 3986 unreserved set gets percent-encoded.
const QUERY_ENCODE: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormError {
    #[error("form at {0} uses POST and cannot be surfaced as GET URLs")]
    MethodNotSurfaceable(String),
    #[error("binding references input position {0}, but the form has {1} inputs")]
    PositionOutOfRange(usize, usize),
    #[error("input position {0} is assigned more than once")]
    DuplicateAssignment(usize),
    #[error("value {value:?} is not offered by input {name:?}")]
    ValueNotOffered { name: String, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputKind {
    TextBox,
    SelectMenu,
    Checkbox,
    RadioGroup,
    Hidden,
}

impl InputKind {
    /// Kinds whose value domain is enumerated in the markup.
    pub fn is_enumerated(self) -> bool {
        matches!(
            self,
            InputKind::SelectMenu | InputKind::Checkbox | InputKind::RadioGroup
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormInput {
    pub name: String,
    pub kind: InputKind,
    pub offered_values: Vec<String>,
    pub default_value: Option<String>,
    pub position: usize,
}

impl FormInput {
    pub fn offers(&self, value: &str) -> bool {
        self.offered_values.iter().any(|v| v == value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormSpec {
    pub site_host: String,
    pub action: String,
    pub method: Method,
    pub inputs: Vec<FormInput>,
    pub source_url: String,
}

impl FormSpec {
    pub fn input(&self, position: usize) -> Option<&FormInput> {
        self.inputs.get(position)
    }

    pub fn position_of(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|i| i.name == name)
    }

    pub fn text_boxes(&self) -> impl Iterator<Item = &FormInput> {
        self.inputs.iter().filter(|i| i.kind == InputKind::TextBox)
    }

    /// Checks binding positions and enumerated-value membership.
    pub fn check_binding(&self, binding: &Binding) -> Result<(), FormError> {
        self.check_positions(binding)?;
        for (pos, value) in binding.assignments() {
            let input = &self.inputs[*pos];
            if input.kind.is_enumerated() && !input.offers(value) {
                return Err(FormError::ValueNotOffered {
                    name: input.name.clone(),
                    value: value.clone(),
                });
            }
        }
        Ok(())
    }

    fn check_positions(&self, binding: &Binding) -> Result<(), FormError> {
        let mut seen = BTreeSet::new();
        for (pos, _) in binding.assignments() {
            if *pos >= self.inputs.len() {
                return Err(FormError::PositionOutOfRange(*pos, self.inputs.len()));
            }
            if !seen.insert(*pos) {
                return Err(FormError::DuplicateAssignment(*pos));
            }
        }
        Ok(())
    }
}

/// Value assignments for a subset of a form's inputs, keyed by position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Binding {
    assignments: Vec<(usize, String)>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a binding; assignments are kept sorted by position.
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (usize, S)>,
        S: Into<String>,
    {
        let mut assignments: Vec<(usize, String)> =
            pairs.into_iter().map(|(p, v)| (p, v.into())).collect();
        assignments.sort_by_key(|(p, _)| *p);
        Self { assignments }
    }

    pub fn assignments(&self) -> &[(usize, String)] {
        &self.assignments
    }

    pub fn get(&self, position: usize) -> Option<&str> {
        self.assignments
            .iter()
            .find(|(p, _)| *p == position)
            .map(|(_, v)| v.as_str())
    }

    /// Sets or replaces the value at `position`.
    pub fn set(&mut self, position: usize, value: impl Into<String>) {
        let value = value.into();
        match self
            .assignments
            .binary_search_by_key(&position, |(p, _)| *p)
        {
            Ok(i) => self.assignments[i].1 = value,
            Err(i) => self.assignments.insert(i, (position, value)),
        }
    }

    /// Union of two bindings; `other` wins on shared positions.
    pub fn merged(&self, other: &Binding) -> Binding {
        let mut out = self.clone();
        for (p, v) in &other.assignments {
            out.set(*p, v.clone());
        }
        out
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.assignments.iter().map(|(p, _)| *p)
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueryTemplate {
    dimensions: BTreeSet<usize>,
    fixed: Binding,
}

impl QueryTemplate {
    /// Returns `None` when `dimensions` is empty or overlaps `fixed`.
    pub fn new(dimensions: BTreeSet<usize>, fixed: Binding) -> Option<Self> {
        if dimensions.is_empty() || fixed.positions().any(|p| dimensions.contains(&p)) {
            return None;
        }
        Some(Self { dimensions, fixed })
    }

    pub fn dimensions(&self) -> &BTreeSet<usize> {
        &self.dimensions
    }

    pub fn fixed(&self) -> &Binding {
        &self.fixed
    }
}

impl fmt::Display for QueryTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.dimensions.iter().map(|d| d.to_string()).collect();
        write!(f, "{{{}}}", dims.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub message: String,
}

/// Parses every `<form>` in `html`. Malformed markup is handled by the
/// HTML5 tree builder; forms whose action cannot be resolved are dropped.
pub fn parse_forms(html: &str, source_url: &str) -> Vec<FormSpec> {
    let (forms, diagnostics) = parse_forms_with_diagnostics(html, source_url);
    for d in diagnostics {
        log::warn!("{}", d.message);
    }
    forms
}

pub fn parse_forms_with_diagnostics(
    html: &str,
    source_url: &str,
) -> (Vec<FormSpec>, Vec<Diagnostic>) {
    let mut diagnostics = Vec::new();
    let base = match Url::parse(source_url) {
        Ok(u) => u,
        Err(e) => {
            diagnostics.push(Diagnostic {
                message: format!("cannot parse source url {source_url:?}: {e}"),
            });
            return (Vec::new(), diagnostics);
        }
    };
    let doc = Html::parse_document(html);
    let form_sel = Selector::parse("form").expect("static selector");
    let control_sel = Selector::parse("input, select, textarea").expect("static selector");

    let mut forms = Vec::new();
    for form in doc.select(&form_sel) {
        let action_attr = form.value().attr("action").unwrap_or("").trim();
        let action = match base.join(action_attr) {
            Ok(mut u) => {
                u.set_query(None);
                u.set_fragment(None);
                u
            }
            Err(e) => {
                diagnostics.push(Diagnostic {
                    message: format!("skipping form with unresolvable action {action_attr:?}: {e}"),
                });
                continue;
            }
        };
        let method = match form.value().attr("method") {
            Some(m) if m.trim().eq_ignore_ascii_case("post") => Method::Post,
            _ => Method::Get,
        };
        let mut inputs: Vec<FormInput> = Vec::new();
        for control in form.select(&control_sel) {
            collect_control(control, &mut inputs);
        }
        forms.push(FormSpec {
            site_host: action.host_str().unwrap_or("").to_string(),
            action: action.to_string(),
            method,
            inputs,
            source_url: base.to_string(),
        });
    }
    (forms, diagnostics)
}

fn collect_control(control: ElementRef<'_>, inputs: &mut Vec<FormInput>) {
    let el = control.value();
    let Some(name) = el
        .attr("name")
        .map(str::to_string)
        .filter(|n| !n.is_empty())
    else {
        return;
    };
    let position = inputs.len();
    match el.name() {
        "textarea" => inputs.push(FormInput {
            name,
            kind: InputKind::TextBox,
            offered_values: Vec::new(),
            default_value: non_empty(control.text().collect::<String>()),
            position,
        }),
        "select" => {
            let option_sel = Selector::parse("option").expect("static selector");
            let mut offered: Vec<String> = Vec::new();
            let mut selected = None;
            for opt in control.select(&option_sel) {
                let value = opt
                    .value()
                    .attr("value")
                    .map(str::to_string)
                    .unwrap_or_else(|| collapse_ws(&opt.text().collect::<String>()));
                if opt.value().attr("selected").is_some() && selected.is_none() {
                    selected = Some(value.clone());
                }
                if !offered.contains(&value) {
                    offered.push(value);
                }
            }
            if offered.is_empty() {
                return;
            }
            let default_value = selected.or_else(|| offered.first().cloned());
            inputs.push(FormInput {
                name,
                kind: InputKind::SelectMenu,
                offered_values: offered,
                default_value,
                position,
            });
        }
        "input" => {
            let ty = el.attr("type").unwrap_or("text").to_ascii_lowercase();
            let value = el.attr("value").map(str::to_string);
            match ty.as_str() {
                "submit" | "button" | "image" | "reset" | "file" => {}
                "hidden" => inputs.push(FormInput {
                    name,
                    kind: InputKind::Hidden,
                    offered_values: Vec::new(),
                    default_value: value,
                    position,
                }),
                "checkbox" => {
                    let value = value.unwrap_or_else(|| "on".to_string());
                    let checked = el.attr("checked").is_some();
                    inputs.push(FormInput {
                        name,
                        kind: InputKind::Checkbox,
                        default_value: checked.then(|| value.clone()),
                        offered_values: vec![value],
                        position,
                    });
                }
                "radio" => {
                    let value = value.unwrap_or_else(|| "on".to_string());
                    let checked = el.attr("checked").is_some();
                    if let Some(group) = inputs
                        .iter_mut()
                        .find(|i| i.kind == InputKind::RadioGroup && i.name == name)
                    {
                        if !group.offers(&value) {
                            group.offered_values.push(value.clone());
                        }
                        if checked && group.default_value.is_none() {
                            group.default_value = Some(value);
                        }
                    } else {
                        inputs.push(FormInput {
                            name,
                            kind: InputKind::RadioGroup,
                            default_value: checked.then(|| value.clone()),
                            offered_values: vec![value],
                            position,
                        });
                    }
                }
                _ => inputs.push(FormInput {
                    name,
                    kind: InputKind::TextBox,
                    offered_values: Vec::new(),
                    default_value: value.filter(|v| !v.is_empty()),
                    position,
                }),
            }
        }
        _ => {}
    }
}

fn non_empty(s: String) -> Option<String> {
    if s.is_empty() {
        None
    } else {
        Some(s)
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn encode_component(s: &str) -> String {
    utf8_percent_encode(s, QUERY_ENCODE).to_string()
}

/// Renders `binding` as the GET URL a browser would submit.
///
/// Every input appears in document order. Unassigned inputs take their
/// default (empty when absent); checkboxes without a value are omitted.
pub fn url_for(form: &FormSpec, binding: &Binding) -> Result<String, FormError> {
    if form.method == Method::Post {
        return Err(FormError::MethodNotSurfaceable(form.action.clone()));
    }
    form.check_positions(binding)?;
    let mut parts = Vec::with_capacity(form.inputs.len());
    for input in &form.inputs {
        let value = binding
            .get(input.position)
            .map(str::to_string)
            .or_else(|| input.default_value.clone());
        let value = match (input.kind, value) {
            (InputKind::Checkbox, None) => continue,
            (_, v) => v.unwrap_or_default(),
        };
        parts.push(format!(
            "{}={}",
            encode_component(&input.name),
            encode_component(&value)
        ));
    }
    Ok(format!("{}?{}", form.action, parts.join("&")))
}

/// Inputs that may vary in a template. Hidden inputs stay at their defaults.
pub fn candidate_inputs(form: &FormSpec) -> Vec<FormInput> {
    form.inputs
        .iter()
        .filter(|i| i.kind != InputKind::Hidden)
        .cloned()
        .collect()
}

/// Decoded `(name, value)` pairs of a URL's query string, in order.
pub fn query_pairs(url: &str) -> Result<Vec<(String, String)>, url::ParseError> {
    let u = Url::parse(url)?;
    Ok(u.query_pairs()
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect())
}
