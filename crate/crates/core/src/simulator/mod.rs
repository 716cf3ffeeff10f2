//! Deterministic synthetic deep-web sites.
//!
//! A [`SiteSpec`] regenerates the same record table and HTML byte for byte.
//! Sites answer form queries exactly like a templated search backend and
//! expose the matched record ids through an evaluator-only channel, which
//! makes coverage measurable against ground truth.
//!
//! Page contract relied on by result counting and coverage:
//! result pages list at most `page_size` records as
//! `<li class="record" data-record-id="ID">` inside `<ul class="results">`;
//! an empty answer renders `<p class="no-results">` instead. There are no
//! pagination links.

mod serve;
mod words;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::form_model::Method;
use crate::surfacer::fetch::{host_key, FetchError, FetchPolicy, Transport};
use crate::text::tokens;

pub use serve::{serve, SimServer};

pub const ACTION_PATH: &str = "/search";
pub const TRUTH_PATH: &str = "/__truth";
pub const TEXT_FIELD: &str = "q";
pub const MIN_FIELD: &str = "min_price";
pub const MAX_FIELD: &str = "max_price";
/// Number of numeric values offered by each end of a range form.
pub const RANGE_SENTINELS: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid site spec: {0}")]
    InvalidSpec(String),
    #[error("unknown query parameter {0:?}")]
    UnknownParameter(String),
    #[error("url {0:?} does not address this site's form action")]
    ForeignUrl(String),
    #[error("cannot bind simulator server: {0}")]
    BindFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SiteKind {
    Search,
    Select,
    Range,
    DbSelect,
    Mixed,
}

impl std::str::FromStr for SiteKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "search" => Ok(SiteKind::Search),
            "select" => Ok(SiteKind::Select),
            "range" => Ok(SiteKind::Range),
            "dbselect" | "db-select" | "db_select" => Ok(SiteKind::DbSelect),
            "mixed" => Ok(SiteKind::Mixed),
            other => Err(format!("unknown site kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumericColumn {
    pub name: String,
    pub min: i64,
    pub max: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default)]
    pub categorical: Vec<CategoricalColumn>,
    #[serde(default)]
    pub numeric: Option<NumericColumn>,
}

impl Schema {
    pub fn for_kind(kind: SiteKind) -> Self {
        let col = |name: &str, values: &[&str]| CategoricalColumn {
            name: name.to_string(),
            values: values.iter().map(|v| v.to_string()).collect(),
        };
        let make = col(
            "make",
            &[
                "acura",
                "audi",
                "bmw",
                "buick",
                "chevrolet",
                "ford",
                "honda",
                "toyota",
            ],
        );
        let color = col(
            "color",
            &["black", "blue", "green", "red", "silver", "white"],
        );
        let price = NumericColumn {
            name: "price".to_string(),
            min: 0,
            max: 100_000,
        };
        match kind {
            SiteKind::Search => Schema::default(),
            SiteKind::Select => Schema {
                categorical: vec![make, color],
                numeric: None,
            },
            SiteKind::Range => Schema {
                categorical: Vec::new(),
                numeric: Some(price),
            },
            SiteKind::DbSelect => Schema {
                categorical: vec![col("section", &["movies", "music", "software", "games"])],
                numeric: None,
            },
            SiteKind::Mixed => Schema {
                categorical: vec![make],
                numeric: Some(price),
            },
        }
    }
}

fn default_zipf() -> f64 {
    1.1
}
fn default_desc_len() -> (usize, usize) {
    (5, 15)
}
fn default_method() -> Method {
    Method::Get
}
fn default_featured() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    pub seed: u64,
    pub kind: SiteKind,
    pub record_count: usize,
    pub page_size: usize,
    pub vocabulary_size: usize,
    pub schema: Schema,
    #[serde(default = "default_zipf")]
    pub zipf_exponent: f64,
    /// Inclusive bounds on description length in tokens.
    #[serde(default = "default_desc_len")]
    pub description_tokens: (usize, usize),
    #[serde(default = "default_method")]
    pub method: Method,
    /// Records shown on the home page next to the form.
    #[serde(default = "default_featured")]
    pub featured: usize,
}

impl SiteSpec {
    pub fn new(
        kind: SiteKind,
        record_count: usize,
        page_size: usize,
        vocabulary_size: usize,
        seed: u64,
    ) -> Self {
        Self {
            seed,
            kind,
            record_count,
            page_size,
            vocabulary_size,
            schema: Schema::for_kind(kind),
            zipf_exponent: default_zipf(),
            description_tokens: default_desc_len(),
            method: Method::Get,
            featured: default_featured(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidSpec(m.to_string()));
        if self.record_count == 0 {
            return bad("record_count must be at least 1");
        }
        if self.page_size == 0 {
            return bad("page_size must be at least 1");
        }
        if self.vocabulary_size == 0 {
            return bad("vocabulary_size must be at least 1");
        }
        let (lo, hi) = self.description_tokens;
        if lo == 0 || lo > hi {
            return bad("description_tokens must satisfy 1 <= min <= max");
        }
        if self.zipf_exponent.is_nan() || self.zipf_exponent <= 0.0 {
            return bad("zipf_exponent must be positive");
        }
        if self.schema.categorical.iter().any(|c| c.values.is_empty()) {
            return bad("categorical columns need at least one value");
        }
        if let Some(n) = &self.schema.numeric {
            if n.min > n.max {
                return bad("numeric column min exceeds max");
            }
        }
        let cats = self.schema.categorical.len();
        let numeric = self.schema.numeric.is_some();
        match self.kind {
            SiteKind::Search => {}
            SiteKind::Select if !(1..=3).contains(&cats) => {
                return bad("Select sites need 1 to 3 categorical columns")
            }
            SiteKind::Range if !numeric => return bad("Range sites need a numeric column"),
            SiteKind::DbSelect if cats != 1 => {
                return bad("DbSelect sites need exactly one categorical column")
            }
            SiteKind::DbSelect
                if self.vocabulary_size < self.schema.categorical[0].values.len() =>
            {
                return bad("DbSelect vocabulary must hold at least one word per category")
            }
            SiteKind::Mixed if cats == 0 || !numeric => {
                return bad("Mixed sites need a categorical and a numeric column")
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: u64,
    pub description: Vec<String>,
    /// Values parallel to `schema.categorical`.
    pub categories: Vec<String>,
    pub numeric: Option<i64>,
}

/// Answer to one form submission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryAnswer {
    pub html: String,
    /// All matching ids in listing order; evaluator-only.
    pub matched: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub content_type: &'static str,
    pub body: String,
}

#[derive(Debug, Clone)]
pub struct Site {
    spec: SiteSpec,
    records: Vec<Record>,
    /// Lowercased description tokens per record, for matching.
    token_sets: Vec<BTreeSet<String>>,
    sentinels: Vec<i64>,
    featured: Vec<usize>,
}

pub fn generate_site(spec: &SiteSpec) -> Result<Site, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let exclude: BTreeSet<String> = spec
        .schema
        .categorical
        .iter()
        .flat_map(|c| c.values.iter().cloned())
        .collect();
    let all_words = words::synthetic_words(&mut rng, spec.vocabulary_size, &exclude);

    // DbSelect partitions the vocabulary into disjoint per-category slices.
    let vocabularies: Vec<Vec<String>> = if spec.kind == SiteKind::DbSelect {
        let n = spec.schema.categorical[0].values.len();
        let per = spec.vocabulary_size / n;
        (0..n)
            .map(|i| all_words[i * per..(i + 1) * per].to_vec())
            .collect()
    } else {
        vec![all_words]
    };
    let zipfs: Vec<Zipf<f64>> = vocabularies
        .iter()
        .map(|v| Zipf::new(v.len() as f64, spec.zipf_exponent).expect("validated zipf parameters"))
        .collect();

    let (lo, hi) = spec.description_tokens;
    let mut records = Vec::with_capacity(spec.record_count);
    for i in 0..spec.record_count {
        let categories: Vec<String> = spec
            .schema
            .categorical
            .iter()
            .map(|c| c.values[rng.random_range(0..c.values.len())].clone())
            .collect();
        let vocab_idx = if spec.kind == SiteKind::DbSelect {
            let col = &spec.schema.categorical[0];
            col.values
                .iter()
                .position(|v| *v == categories[0])
                .unwrap_or(0)
        } else {
            0
        };
        let len = rng.random_range(lo..=hi);
        let description = (0..len)
            .map(|_| {
                let rank = zipfs[vocab_idx].sample(&mut rng) as usize;
                vocabularies[vocab_idx][rank.clamp(1, vocabularies[vocab_idx].len()) - 1].clone()
            })
            .collect();
        let numeric = spec
            .schema
            .numeric
            .as_ref()
            .map(|n| rng.random_range(n.min..=n.max));
        records.push(Record {
            id: i as u64 + 1,
            description,
            categories,
            numeric,
        });
    }
    Ok(Site::from_records(spec.clone(), records))
}

impl Site {
    /// Builds a site over hand-made records (fixtures).
    pub fn from_records(spec: SiteSpec, records: Vec<Record>) -> Self {
        let token_sets = records
            .iter()
            .map(|r| r.description.iter().flat_map(|w| tokens(w)).collect())
            .collect();
        let sentinels = spec
            .schema
            .numeric
            .as_ref()
            .map(|_| range_sentinels(&records))
            .unwrap_or_default();
        let featured = pick_featured(&spec, &records);
        Site {
            spec,
            records,
            token_sets,
            sentinels,
            featured,
        }
    }

    pub fn spec(&self) -> &SiteSpec {
        &self.spec
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }

    /// Values offered by both ends of the range selects.
    pub fn range_sentinels(&self) -> &[i64] {
        &self.sentinels
    }

    /// Every description token, sorted.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        self.token_sets.iter().flatten().cloned().collect()
    }

    /// Form field names in document order.
    pub fn field_names(&self) -> Vec<String> {
        let mut f = Vec::new();
        let cats = self.spec.schema.categorical.iter().map(|c| c.name.clone());
        match self.spec.kind {
            SiteKind::Search => f.push(TEXT_FIELD.to_string()),
            SiteKind::Select => f.extend(cats),
            SiteKind::Range => f.extend([MIN_FIELD.to_string(), MAX_FIELD.to_string()]),
            SiteKind::DbSelect => {
                f.extend(cats);
                f.push(TEXT_FIELD.to_string());
            }
            SiteKind::Mixed => {
                f.push(TEXT_FIELD.to_string());
                f.extend(cats.take(1));
                f.extend([MIN_FIELD.to_string(), MAX_FIELD.to_string()]);
            }
        }
        f
    }

    pub fn form_page(&self) -> String {
        let mut h = String::new();
        h.push_str("<!DOCTYPE html>\n<html><head><title>Listings</title></head><body>\n");
        h.push_str("<h1>Listings</h1>\n");
        let method = match self.spec.method {
            Method::Get => "get",
            Method::Post => "post",
        };
        let _ = writeln!(h, r#"<form action="{ACTION_PATH}" method="{method}">"#);
        for name in self.field_names() {
            if name == TEXT_FIELD {
                let _ = writeln!(
                    h,
                    r#"<label>Keywords <input type="text" name="{TEXT_FIELD}"></label>"#
                );
            } else if name == MIN_FIELD || name == MAX_FIELD {
                let _ = write!(h, r#"<select name="{name}"><option value="">Any</option>"#);
                for v in &self.sentinels {
                    let _ = write!(h, r#"<option value="{v}">{v}</option>"#);
                }
                h.push_str("</select>\n");
            } else if let Some(col) = self.spec.schema.categorical.iter().find(|c| c.name == name) {
                let _ = write!(h, r#"<select name="{name}"><option value="">Any</option>"#);
                for v in &col.values {
                    let v = escape(v);
                    let _ = write!(h, r#"<option value="{v}">{v}</option>"#);
                }
                h.push_str("</select>\n");
            }
        }
        h.push_str("<input type=\"submit\" value=\"Search\">\n</form>\n");
        if !self.featured.is_empty() {
            h.push_str("<div class=\"featured\"><h2>Featured listings</h2>\n");
            for &i in &self.featured {
                let _ = writeln!(
                    h,
                    "<p class=\"featured-item\">{}</p>",
                    self.item_text(&self.records[i])
                );
            }
            h.push_str("</div>\n");
        }
        h.push_str("</body></html>\n");
        h
    }

    fn item_text(&self, r: &Record) -> String {
        let mut parts = vec![escape(&r.description.join(" "))];
        if self.spec.kind != SiteKind::Search {
            for c in &r.categories {
                parts.push(escape(c));
            }
            if let Some(n) = r.numeric {
                parts.push(format!("${n}"));
            }
        }
        parts.join(" &middot; ")
    }

    fn matches(&self, idx: usize, query: &ParsedQuery) -> bool {
        let r = &self.records[idx];
        if !query
            .keywords
            .iter()
            .all(|k| self.token_sets[idx].contains(k))
        {
            return false;
        }
        for (col, value) in &query.equals {
            if r.categories[*col] != *value {
                return false;
            }
        }
        if let Some((lo, hi)) = query.range {
            match r.numeric {
                Some(n) if lo <= n && n <= hi => {}
                _ => return false,
            }
        }
        true
    }

    fn parse_query(&self, params: &[(String, String)]) -> Result<Option<ParsedQuery>, SimError> {
        let fields = self.field_names();
        let mut last: BTreeMap<&str, &str> = BTreeMap::new();
        for (k, v) in params {
            if !fields.iter().any(|f| f == k) {
                return Err(SimError::UnknownParameter(k.clone()));
            }
            last.insert(k.as_str(), v.as_str());
        }
        let mut q = ParsedQuery::default();
        let mut lo = i64::MIN;
        let mut hi = i64::MAX;
        let mut ranged = false;
        for (k, v) in last {
            let v = v.trim();
            if v.is_empty() {
                continue;
            }
            if k == TEXT_FIELD {
                q.keywords = tokens(v);
            } else if k == MIN_FIELD || k == MAX_FIELD {
                let Some(n) = parse_number(v) else {
                    return Ok(None);
                };
                ranged = true;
                if k == MIN_FIELD {
                    lo = n;
                } else {
                    hi = n;
                }
            } else if let Some(col) = self
                .spec
                .schema
                .categorical
                .iter()
                .position(|c| c.name == k)
            {
                q.equals.push((col, v.to_string()));
            }
        }
        if ranged {
            if lo > hi {
                return Ok(None);
            }
            q.range = Some((lo, hi));
        }
        Ok(Some(q))
    }

    /// Answers a form submission. Matching is conjunctive over all constrained
    /// fields; empty values leave a field unconstrained.
    pub fn answer_query(&self, params: &[(String, String)]) -> Result<QueryAnswer, SimError> {
        let matched: Vec<u64> = match self.parse_query(params)? {
            Some(q) => (0..self.records.len())
                .filter(|&i| self.matches(i, &q))
                .map(|i| self.records[i].id)
                .collect(),
            None => Vec::new(),
        };
        Ok(QueryAnswer {
            html: self.render_results(&matched),
            matched,
        })
    }

    /// Ids listed on the result page: the first `page_size` matches.
    pub fn exposed_ids(&self, params: &[(String, String)]) -> Result<Vec<u64>, SimError> {
        let mut ids = self.answer_query(params)?.matched;
        ids.truncate(self.spec.page_size);
        Ok(ids)
    }

    fn render_results(&self, matched: &[u64]) -> String {
        let mut h = String::new();
        h.push_str("<!DOCTYPE html>\n<html><head><title>Search results</title></head><body>\n");
        h.push_str("<h1>Search results</h1>\n");
        if matched.is_empty() {
            h.push_str("<p class=\"no-results\">No matching records.</p>\n");
        } else {
            h.push_str("<ul class=\"results\">\n");
            for id in matched.iter().take(self.spec.page_size) {
                let r = &self.records[self.index_of(*id)];
                let _ = writeln!(
                    h,
                    "<li class=\"record\" data-record-id=\"{id}\">{}</li>",
                    self.item_text(r)
                );
            }
            h.push_str("</ul>\n");
        }
        h.push_str("</body></html>\n");
        h
    }

    fn index_of(&self, id: u64) -> usize {
        match self.records.binary_search_by_key(&id, |r| r.id) {
            Ok(i) => i,
            Err(_) => self
                .records
                .iter()
                .position(|r| r.id == id)
                .expect("id from this site"),
        }
    }

    /// Serves a request path (with query) the way the HTTP endpoint does.
    pub fn handle(&self, path_and_query: &str) -> HttpResponse {
        let html = |status, body| HttpResponse {
            status,
            content_type: "text/html; charset=utf-8",
            body,
        };
        let Ok(url) = Url::parse(&format!("http://sim{path_and_query}")) else {
            return html(400, "bad request".to_string());
        };
        let params: Vec<(String, String)> = url
            .query_pairs()
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect();
        match url.path() {
            "/" => html(200, self.form_page()),
            ACTION_PATH if self.spec.method == Method::Get => match self.answer_query(&params) {
                Ok(a) => html(200, a.html),
                Err(e) => html(400, e.to_string()),
            },
            TRUTH_PATH => match self.answer_query(&params) {
                Ok(a) => HttpResponse {
                    status: 200,
                    content_type: "application/json",
                    body: serde_json::to_string(&a.matched).expect("ids serialize"),
                },
                Err(e) => html(400, e.to_string()),
            },
            ACTION_PATH => html(405, "method not allowed".to_string()),
            _ => html(404, "not found".to_string()),
        }
    }

    /// Fraction of records listed on at least one of the given result pages.
    pub fn coverage<S: AsRef<str>>(&self, urls: &[S]) -> Result<f64, SimError> {
        Ok(self.covered_ids(urls)?.len() as f64 / self.records.len() as f64)
    }

    pub fn covered_ids<S: AsRef<str>>(&self, urls: &[S]) -> Result<BTreeSet<u64>, SimError> {
        let mut covered = BTreeSet::new();
        for u in urls {
            let u = u.as_ref();
            let parsed = Url::parse(u).map_err(|_| SimError::ForeignUrl(u.to_string()))?;
            if parsed.path() != ACTION_PATH {
                return Err(SimError::ForeignUrl(u.to_string()));
            }
            let params: Vec<(String, String)> = parsed
                .query_pairs()
                .map(|(k, v)| (k.into_owned(), v.into_owned()))
                .collect();
            covered.extend(self.exposed_ids(&params)?);
        }
        Ok(covered)
    }

    /// Ground-truth match count for a URL addressed to the form action.
    pub fn true_count(&self, url: &str) -> Result<usize, SimError> {
        let parsed = Url::parse(url).map_err(|_| SimError::ForeignUrl(url.to_string()))?;
        if parsed.path() != ACTION_PATH {
            return Err(SimError::ForeignUrl(url.to_string()));
        }
        let params: Vec<(String, String)> = parsed
            .query_pairs()
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect();
        Ok(self.answer_query(&params)?.matched.len())
    }
}

#[derive(Debug, Default)]
struct ParsedQuery {
    keywords: Vec<String>,
    equals: Vec<(usize, String)>,
    range: Option<(i64, i64)>,
}

fn parse_number(v: &str) -> Option<i64> {
    let cleaned: String = v.chars().filter(|c| *c != ',' && *c != '$').collect();
    if let Ok(n) = cleaned.parse::<i64>() {
        return Some(n);
    }
    cleaned
        .parse::<f64>()
        .ok()
        .filter(|f| f.is_finite())
        .map(|f| f.floor() as i64)
}

/// Ten price points at evenly spaced quantiles of the data, starting at the
/// minimum and ending at the maximum value present.
fn range_sentinels(records: &[Record]) -> Vec<i64> {
    let mut prices: Vec<i64> = records.iter().filter_map(|r| r.numeric).collect();
    if prices.is_empty() {
        return Vec::new();
    }
    prices.sort_unstable();
    let n = prices.len();
    let mut out: Vec<i64> = (0..RANGE_SENTINELS)
        .map(|i| prices[(i * (n - 1) + (RANGE_SENTINELS - 1) / 2) / (RANGE_SENTINELS - 1)])
        .collect();
    out.dedup();
    out
}

fn pick_featured(spec: &SiteSpec, records: &[Record]) -> Vec<usize> {
    if records.is_empty() || spec.featured == 0 {
        return Vec::new();
    }
    if spec.kind == SiteKind::DbSelect && !spec.schema.categorical.is_empty() {
        // Two per category so every partition has seed text.
        let mut out = Vec::new();
        for value in &spec.schema.categorical[0].values {
            out.extend(
                records
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.categories.first() == Some(value))
                    .map(|(i, _)| i)
                    .take(2),
            );
        }
        return out;
    }
    let k = spec.featured.min(records.len());
    (0..k).map(|i| i * records.len() / k).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// In-process transport over simulated sites, keyed by `host[:port]`.
#[derive(Clone, Default)]
pub struct SimTransport {
    sites: BTreeMap<String, Arc<Site>>,
}

impl SimTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_site(mut self, host: &str, site: Arc<Site>) -> Self {
        self.sites.insert(host.to_string(), site);
        self
    }
}

impl Transport for SimTransport {
    fn get(&self, url: &Url, _policy: &FetchPolicy) -> Result<String, FetchError> {
        let site = self
            .sites
            .get(&host_key(url))
            .ok_or_else(|| FetchError::Transport(format!("no simulated host for {url}")))?;
        let mut pq = url.path().to_string();
        if let Some(q) = url.query() {
            pq.push('?');
            pq.push_str(q);
        }
        let resp = site.handle(&pq);
        if resp.status == 200 {
            Ok(resp.body)
        } else {
            Err(FetchError::HttpError(resp.status))
        }
    }
}
