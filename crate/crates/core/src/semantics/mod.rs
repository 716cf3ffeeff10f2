//! Input typing and correlated-input detection.
//!
//! Text boxes are typed in two stages: name-token rules propose a type, and
//! an optional probe oracle confirms it by submitting lexicon seeds against
//! random strings. Correlations come in two shapes: min/max range pairs and
//! database-selection (a category menu choosing which collection a search box
//! queries).

pub mod lexicon;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::form_model::{FormInput, FormSpec, InputKind};
pub use lexicon::{validate, NamePatterns, TypeLexicon};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("range value list is empty")]
    EmptyValueList,
    #[error("range value {0:?} is not numeric")]
    NotNumeric(String),
    #[error("range values must be strictly ascending")]
    NotAscending,
    #[error("lexicon error: {0}")]
    Lexicon(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TypeTag {
    GenericSearch,
    Zipcode,
    CityName,
    Date,
    Price,
    Unknown,
}

impl TypeTag {
    pub(crate) fn from_key(key: &str) -> Option<Self> {
        match key {
            "zipcode" => Some(TypeTag::Zipcode),
            "city" => Some(TypeTag::CityName),
            "date" => Some(TypeTag::Date),
            "price" => Some(TypeTag::Price),
            _ => None,
        }
    }

    pub fn is_typed(self) -> bool {
        matches!(
            self,
            TypeTag::Zipcode | TypeTag::CityName | TypeTag::Date | TypeTag::Price
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputType {
    pub tag: TypeTag,
    pub confidence: f64,
}

impl InputType {
    pub const UNKNOWN: InputType = InputType {
        tag: TypeTag::Unknown,
        confidence: 0.0,
    };

    pub fn new(tag: TypeTag, confidence: f64) -> Self {
        if tag == TypeTag::Unknown {
            return Self::UNKNOWN;
        }
        Self { tag, confidence }
    }
}

const NAME_ONLY: f64 = 0.6;
const NAME_AND_PROBE: f64 = 0.9;
const PROBE_ONLY: f64 = 0.8;
const SEARCH_DEFAULT: f64 = 0.5;

/// Two-stage typed-input classifier.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub lexicon: TypeLexicon,
    pub patterns: NamePatterns,
    /// Seed and random values submitted per hypothesis.
    pub probes_per_type: usize,
    pub accept_threshold: f64,
    pub reject_threshold: f64,
    pub seed: u64,
}

impl Default for Classifier {
    fn default() -> Self {
        Self {
            lexicon: TypeLexicon::bundled(),
            patterns: NamePatterns::default(),
            probes_per_type: 5,
            accept_threshold: 0.8,
            reject_threshold: 0.2,
            seed: 0,
        }
    }
}

impl Classifier {
    /// Hypothesis from name tokens alone.
    pub fn name_hypothesis(&self, name: &str) -> Option<TypeTag> {
        let toks = name_tokens(name);
        toks.iter()
            .find_map(|t| self.patterns.type_for_token(t))
            .or_else(|| self.patterns.type_for_token(&toks.concat()))
    }

    /// Types a text box. `probe` returns whether submitting a value yields a
    /// non-error, non-empty result page.
    pub fn classify(
        &self,
        input: &FormInput,
        form: &FormSpec,
        probe: Option<&mut dyn FnMut(&str) -> bool>,
    ) -> InputType {
        let text_boxes = form.text_boxes().count();
        let fallback = if text_boxes <= 2 {
            InputType::new(TypeTag::GenericSearch, SEARCH_DEFAULT)
        } else {
            InputType::UNKNOWN
        };
        if input.kind != InputKind::TextBox {
            return InputType::UNKNOWN;
        }
        let named = self.name_hypothesis(&input.name);
        let Some(probe) = probe else {
            return named.map_or(fallback, |t| InputType::new(t, NAME_ONLY));
        };
        let hypotheses: Vec<TypeTag> = match named {
            Some(t) => vec![t],
            None if text_boxes > 2 => self.lexicon.tags().collect(),
            None => return fallback,
        };
        let mut random_rate: Option<f64> = None;
        for tag in hypotheses {
            let seeds = spread(self.lexicon.seeds(tag), self.probes_per_type);
            if seeds.is_empty() {
                continue;
            }
            let accepted = seeds.iter().filter(|s| probe(s)).count();
            if (accepted as f64) / (seeds.len() as f64) < self.accept_threshold {
                continue;
            }
            let rate = *random_rate.get_or_insert_with(|| {
                let randoms =
                    random_strings(self.seed ^ name_hash(&input.name), self.probes_per_type);
                let hits = randoms.iter().filter(|s| probe(s)).count();
                hits as f64 / randoms.len() as f64
            });
            if rate < self.reject_threshold {
                let conf = if named.is_some() {
                    NAME_AND_PROBE
                } else {
                    PROBE_ONLY
                };
                return InputType::new(tag, conf);
            }
        }
        fallback
    }
}

/// Evenly spaced sample of `k` values.
fn spread(values: &[String], k: usize) -> Vec<&String> {
    if values.len() <= k {
        return values.iter().collect();
    }
    (0..k).map(|i| &values[i * values.len() / k]).collect()
}

fn random_strings(seed: u64, k: usize) -> Vec<String> {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            (0..8)
                .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char)
                .collect()
        })
        .collect()
}

fn name_hash(name: &str) -> u64 {
    xxhash_rust::xxh64::xxh64(name.as_bytes(), 0)
}

/// Splits an input name on `_`, `-`, `.`, whitespace and camelCase
/// boundaries, lowercasing the parts.
pub fn name_tokens(name: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for c in name.chars() {
        if !c.is_alphanumeric() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower && !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CorrelationKind {
    RangePair,
    DbSelection,
}

/// For `RangePair`, members are `(min_end, max_end)`; for `DbSelection`,
/// `(select_menu, text_box)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CorrelationPattern {
    pub kind: CorrelationKind,
    pub members: (usize, usize),
}

impl CorrelationPattern {
    pub fn positions(&self) -> [usize; 2] {
        [self.members.0, self.members.1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Min,
    Max,
}

fn range_marker(patterns: &NamePatterns, name: &str) -> Option<(Side, String)> {
    let toks = name_tokens(name);
    let (idx, side) = toks.iter().enumerate().find_map(|(i, t)| {
        if patterns.range_markers.min.contains(t) {
            Some((i, Side::Min))
        } else if patterns.range_markers.max.contains(t) {
            Some((i, Side::Max))
        } else {
            None
        }
    })?;
    let stem: Vec<&str> = toks
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, t)| t.as_str())
        .collect();
    if stem.is_empty() {
        return None;
    }
    Some((side, stem.join("_")))
}

/// Parses an offered value as a number after stripping currency signs and
/// thousands separators.
pub fn parse_numeric(value: &str) -> Option<f64> {
    let cleaned: String = value
        .trim()
        .chars()
        .filter(|c| !matches!(c, ',' | '$' | '€' | '£' | ' '))
        .collect();
    if cleaned.is_empty() {
        return None;
    }
    cleaned.parse::<f64>().ok().filter(|f| f.is_finite())
}

fn numeric_fraction(input: &FormInput) -> f64 {
    let values: Vec<&String> = input
        .offered_values
        .iter()
        .filter(|v| !v.trim().is_empty())
        .collect();
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|v| parse_numeric(v).is_some()).count() as f64 / values.len() as f64
}

/// At least 90% of the non-placeholder options parse as numbers.
pub fn is_numeric_menu(input: &FormInput) -> bool {
    input.kind == InputKind::SelectMenu && numeric_fraction(input) >= 0.9
}

fn numeric_values(input: &FormInput) -> Vec<f64> {
    input
        .offered_values
        .iter()
        .filter_map(|v| parse_numeric(v))
        .collect()
}

fn overlap_ratio(a: &[f64], b: &[f64]) -> f64 {
    let smaller = a.len().min(b.len());
    if smaller == 0 {
        return 0.0;
    }
    let shared = a.iter().filter(|x| b.iter().any(|y| y == *x)).count();
    shared as f64 / smaller as f64
}

/// Finds min/max input pairs over one property.
pub fn detect_range_pairs(form: &FormSpec, patterns: &NamePatterns) -> Vec<CorrelationPattern> {
    let marked: Vec<(usize, Side, String)> = form
        .inputs
        .iter()
        .filter(|i| matches!(i.kind, InputKind::TextBox | InputKind::SelectMenu))
        .filter_map(|i| range_marker(patterns, &i.name).map(|(s, stem)| (i.position, s, stem)))
        .collect();
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    for (a, (pa, sa, stem_a)) in marked.iter().enumerate() {
        for (pb, sb, stem_b) in &marked[a + 1..] {
            if sa == sb || stem_a != stem_b || pb - pa > 3 {
                continue;
            }
            let (ia, ib) = (&form.inputs[*pa], &form.inputs[*pb]);
            if ia.kind == InputKind::SelectMenu && ib.kind == InputKind::SelectMenu {
                if !is_numeric_menu(ia) || !is_numeric_menu(ib) {
                    continue;
                }
                if overlap_ratio(&numeric_values(ia), &numeric_values(ib)) < 0.5 {
                    continue;
                }
            }
            let (min_end, max_end) = if *sa == Side::Min {
                (*pa, *pb)
            } else {
                (*pb, *pa)
            };
            candidates.push((pb - pa, min_end, max_end));
        }
    }
    // Closest pairs first; each input joins at most one pair.
    candidates.sort_by_key(|&(d, mn, mx)| (d, mn.min(mx)));
    let mut used = vec![false; form.inputs.len()];
    let mut out = Vec::new();
    for (_, mn, mx) in candidates {
        if used[mn] || used[mx] {
            continue;
        }
        used[mn] = true;
        used[mx] = true;
        out.push(CorrelationPattern {
            kind: CorrelationKind::RangePair,
            members: (mn, mx),
        });
    }
    out.sort_by_key(|p| p.members.0.min(p.members.1));
    out
}

/// Decimal places used by a numeric literal.
fn decimals(value: &str) -> usize {
    value.split_once('.').map_or(0, |(_, f)| f.trim_end().len())
}

/// Partitions the span of `values` into consecutive disjoint buckets:
/// `(v1, v1)`, then `(succ(v[i-1]), v[i])`, where the successor adds one unit
/// of the finest decimal precision present.
pub fn range_bindings(values: &[String]) -> Result<Vec<(String, String)>, SemanticsError> {
    if values.is_empty() {
        return Err(SemanticsError::EmptyValueList);
    }
    let parsed: Vec<f64> = values
        .iter()
        .map(|v| parse_numeric(v).ok_or_else(|| SemanticsError::NotNumeric(v.clone())))
        .collect::<Result<_, _>>()?;
    if parsed.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SemanticsError::NotAscending);
    }
    let precision = values.iter().map(|v| decimals(v)).max().unwrap_or(0);
    let unit = 10f64.powi(-(precision as i32));
    let mut out = Vec::with_capacity(values.len());
    out.push((values[0].clone(), values[0].clone()));
    for i in 1..values.len() {
        let lo = format!("{:.*}", precision, parsed[i - 1] + unit);
        out.push((lo, values[i].clone()));
    }
    Ok(out)
}

/// Detects a category menu that selects the collection a lone search box
/// queries. Numeric menus are excluded.
pub fn detect_db_selection(
    form: &FormSpec,
    types: &BTreeMap<usize, InputType>,
) -> Option<CorrelationPattern> {
    let search: Vec<usize> = form
        .text_boxes()
        .filter(|i| {
            types
                .get(&i.position)
                .is_some_and(|t| t.tag == TypeTag::GenericSearch)
        })
        .map(|i| i.position)
        .collect();
    let [text] = search.as_slice() else {
        return None;
    };
    form.inputs
        .iter()
        .filter(|i| i.kind == InputKind::SelectMenu)
        .filter(|i| {
            let has_values = i.offered_values.iter().any(|v| !v.trim().is_empty());
            has_values && numeric_fraction(i) < 0.1
        })
        .min_by_key(|i| (i.position.abs_diff(*text), i.position))
        .map(|sel| CorrelationPattern {
            kind: CorrelationKind::DbSelection,
            members: (sel.position, *text),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form_model::parse_forms;

    fn form(body: &str) -> FormSpec {
        parse_forms(
            &format!(r#"<form action="/s">{body}</form>"#),
            "http://a.com/",
        )
        .remove(0)
    }

    fn select(name: &str, values: &[&str]) -> String {
        let opts: String = values
            .iter()
            .map(|v| format!("<option>{v}</option>"))
            .collect();
        format!(r#"<select name="{name}">{opts}</select>"#)
    }

    #[test]
    fn name_tokenization() {
        assert_eq!(name_tokens("zipCode"), vec!["zip", "code"]);
        assert_eq!(name_tokens("min_price"), vec!["min", "price"]);
        assert_eq!(name_tokens("from-Year"), vec!["from", "year"]);
        assert_eq!(name_tokens("ZIP"), vec!["zip"]);
    }

    #[test]
    fn zipcode_name_without_probe() {
        let f = form(r#"<input name="zipcode">"#);
        let t = Classifier::default().classify(&f.inputs[0], &f, None);
        assert_eq!(t, InputType::new(TypeTag::Zipcode, 0.6));
    }

    #[test]
    fn lone_box_is_search() {
        let f = form(r#"<input name="q">"#);
        let t = Classifier::default().classify(&f.inputs[0], &f, None);
        assert_eq!(t, InputType::new(TypeTag::GenericSearch, 0.5));
    }

    #[test]
    fn rejecting_probe_leaves_unknown() {
        let f = form(r#"<input name="xyzzy"><input name="a"><input name="b"><input name="c">"#);
        let mut calls = 0;
        let mut probe = |_: &str| {
            calls += 1;
            false
        };
        let t = Classifier::default().classify(&f.inputs[0], &f, Some(&mut probe));
        assert_eq!(t, InputType::UNKNOWN);
        assert_eq!(t.confidence, 0.0);
        // Five seeds for each of the four types, no random strings needed.
        assert_eq!(calls, 20);
    }

    #[test]
    fn probe_confirms_zip_and_detects_unnamed_zip() {
        let f = form(r#"<input name="zip"><input name="box2"><input name="box3">"#);
        let mut probe = |v: &str| validate(TypeTag::Zipcode, v);
        let c = Classifier::default();
        let t = c.classify(&f.inputs[0], &f, Some(&mut probe));
        assert_eq!(t, InputType::new(TypeTag::Zipcode, 0.9));
        let t = c.classify(&f.inputs[1], &f, Some(&mut probe));
        assert_eq!(t, InputType::new(TypeTag::Zipcode, 0.8));
    }

    #[test]
    fn probe_accepting_everything_is_not_typed() {
        let f = form(r#"<input name="zip">"#);
        let mut probe = |_: &str| true;
        let t = Classifier::default().classify(&f.inputs[0], &f, Some(&mut probe));
        assert_eq!(t.tag, TypeTag::GenericSearch);
    }

    #[test]
    fn classification_is_deterministic() {
        let f = form(r#"<input name="zip"><input name="x"><input name="y">"#);
        let c = Classifier::default();
        let mut log_a = Vec::new();
        let mut log_b = Vec::new();
        let mut pa = |v: &str| {
            log_a.push(v.to_string());
            v.len() == 5
        };
        let a = c.classify(&f.inputs[0], &f, Some(&mut pa));
        let mut pb = |v: &str| {
            log_b.push(v.to_string());
            v.len() == 5
        };
        let b = c.classify(&f.inputs[0], &f, Some(&mut pb));
        assert_eq!(a, b);
        assert_eq!(log_a, log_b);
    }

    #[test]
    fn min_max_price_pair() {
        let f = form(r#"<input name="make"><input name="min_price"><input name="max_price">"#);
        let pairs = detect_range_pairs(&f, &NamePatterns::default());
        assert_eq!(
            pairs,
            vec![CorrelationPattern {
                kind: CorrelationKind::RangePair,
                members: (1, 2)
            }]
        );
    }

    #[test]
    fn no_markers_no_pairs() {
        let f = form(r#"<input name="q"><input name="state">"#);
        assert!(detect_range_pairs(&f, &NamePatterns::default()).is_empty());
    }

    #[test]
    fn year_selects_pair() {
        let years: Vec<String> = (1990..=2000).map(|y| y.to_string()).collect();
        let years: Vec<&str> = years.iter().map(String::as_str).collect();
        let f = form(&format!(
            "{}{}",
            select("from_year", &years),
            select("to_year", &years)
        ));
        let pairs = detect_range_pairs(&f, &NamePatterns::default());
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].members, (0, 1));
    }

    #[test]
    fn min_end_is_stable_under_reordering() {
        let f = form(r#"<input name="price_max"><input name="price_min">"#);
        let pairs = detect_range_pairs(&f, &NamePatterns::default());
        assert_eq!(pairs[0].members, (1, 0));
    }

    #[test]
    fn far_apart_or_disjoint_selects_do_not_pair() {
        let f = form(
            r#"<input name="min_price"><input name="a"><input name="b"><input name="c"><input name="max_price">"#,
        );
        assert!(detect_range_pairs(&f, &NamePatterns::default()).is_empty());
        let f = form(&format!(
            "{}{}",
            select("min_year", &["1990", "1991", "1992"]),
            select("max_year", &["2001", "2002", "2003"])
        ));
        assert!(detect_range_pairs(&f, &NamePatterns::default()).is_empty());
        let f = form(&format!(
            "{}{}",
            select("min_size", &["small", "medium"]),
            select("max_size", &["small", "medium"])
        ));
        assert!(detect_range_pairs(&f, &NamePatterns::default()).is_empty());
    }

    #[test]
    fn range_bindings_successor_rule() {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(
            range_bindings(&v(&["5"])).unwrap(),
            vec![("5".into(), "5".into())]
        );
        assert_eq!(
            range_bindings(&v(&["1", "2", "4"])).unwrap(),
            vec![
                ("1".into(), "1".into()),
                ("2".into(), "2".into()),
                ("3".into(), "4".into())
            ]
        );
        assert_eq!(
            range_bindings(&v(&["0.5", "1.25"])).unwrap(),
            vec![("0.5".into(), "0.5".into()), ("0.51".into(), "1.25".into())]
        );
        assert_eq!(range_bindings(&[]), Err(SemanticsError::EmptyValueList));
        assert_eq!(
            range_bindings(&v(&["3", "2"])),
            Err(SemanticsError::NotAscending)
        );
        let ten: Vec<String> = (1..=10).map(|i| (i * 1000).to_string()).collect();
        assert_eq!(range_bindings(&ten).unwrap().len(), 10);
    }

    #[test]
    fn db_selection_detection() {
        let f = form(&format!(
            r#"<input name="q">{}"#,
            select("section", &["movies", "music", "software"])
        ));
        let types = BTreeMap::from([(0, InputType::new(TypeTag::GenericSearch, 0.5))]);
        assert_eq!(
            detect_db_selection(&f, &types),
            Some(CorrelationPattern {
                kind: CorrelationKind::DbSelection,
                members: (1, 0)
            })
        );
        let f = form(r#"<input name="q">"#);
        assert_eq!(detect_db_selection(&f, &types), None);
        let f = form(&format!(
            r#"<input name="q">{}"#,
            select("year", &["1999", "2000", "2001"])
        ));
        assert_eq!(detect_db_selection(&f, &types), None);
    }

    #[test]
    fn db_selection_picks_nearest_menu() {
        let f = form(&format!(
            r#"{}<input name="x" type="hidden">{}<input name="q">"#,
            select("far", &["a", "b"]),
            select("near", &["c", "d"])
        ));
        let types = BTreeMap::from([(3, InputType::new(TypeTag::GenericSearch, 0.5))]);
        assert_eq!(detect_db_selection(&f, &types).unwrap().members, (2, 3));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// Buckets are disjoint, ordered, and span exactly [v1, vn] on integer data.
            #[test]
            fn buckets_partition_integer_span(mut vals in proptest::collection::btree_set(0i64..10_000, 1..12)) {
                let vals: Vec<i64> = std::mem::take(&mut vals).into_iter().collect();
                let strs: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
                let buckets = range_bindings(&strs).unwrap();
                prop_assert_eq!(buckets.len(), vals.len());
                let mut covered = Vec::new();
                for (lo, hi) in &buckets {
                    let (lo, hi): (i64, i64) = (lo.parse().unwrap(), hi.parse().unwrap());
                    prop_assert!(lo <= hi);
                    covered.extend(lo..=hi);
                }
                let expected: Vec<i64> = (vals[0]..=*vals.last().unwrap()).collect();
                prop_assert_eq!(covered, expected);
            }

            #[test]
            fn range_pairs_never_self_pair(names in proptest::collection::vec("(min|max|from|to)_(price|year|q)", 1..6)) {
                let body: String = names.iter().map(|n| format!(r#"<input name="{n}">"#)).collect();
                let f = form(&body);
                for p in detect_range_pairs(&f, &NamePatterns::default()) {
                    prop_assert_ne!(p.members.0, p.members.1);
                }
            }
        }
    }
}
