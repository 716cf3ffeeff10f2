//! Typed-input lexicons and the hand-authored name patterns.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SemanticsError, TypeTag};

const ZIPCODES: &str = include_str!("../../data/lexicons/zipcodes.txt");
const CITIES: &str = include_str!("../../data/lexicons/cities.txt");
const DATES: &str = include_str!("../../data/lexicons/dates.txt");
const PRICES: &str = include_str!("../../data/lexicons/prices.txt");
const PATTERNS: &str = include_str!("../../data/patterns.json");

/// Seed values per typed-input tag, each paired with a syntactic validator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeLexicon {
    seeds: BTreeMap<TypeTag, Vec<String>>,
}

impl Default for TypeLexicon {
    fn default() -> Self {
        Self::bundled()
    }
}

impl TypeLexicon {
    pub fn bundled() -> Self {
        let mut seeds = BTreeMap::new();
        seeds.insert(TypeTag::Zipcode, lines(ZIPCODES));
        seeds.insert(TypeTag::CityName, lines(CITIES));
        seeds.insert(TypeTag::Date, lines(DATES));
        seeds.insert(TypeTag::Price, lines(PRICES));
        Self { seeds }
    }

    /// Replaces the seed list of `tag` with the lines of `path`.
    pub fn load_file(&mut self, tag: TypeTag, path: &Path) -> Result<(), SemanticsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SemanticsError::Lexicon(format!("{}: {e}", path.display())))?;
        let values = lines(&text);
        if let Some(bad) = values.iter().find(|v| !validate(tag, v)) {
            return Err(SemanticsError::Lexicon(format!(
                "{}: value {bad:?} fails the {tag:?} validator",
                path.display()
            )));
        }
        self.seeds.insert(tag, values);
        Ok(())
    }

    pub fn seeds(&self, tag: TypeTag) -> &[String] {
        self.seeds.get(&tag).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn tags(&self) -> impl Iterator<Item = TypeTag> + '_ {
        self.seeds.keys().copied()
    }
}

fn lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Syntactic predicate for a typed value.
pub fn validate(tag: TypeTag, value: &str) -> bool {
    match tag {
        TypeTag::Zipcode => is_zipcode(value),
        TypeTag::CityName => is_city_name(value),
        TypeTag::Date => is_date(value),
        TypeTag::Price => is_price(value),
        TypeTag::GenericSearch | TypeTag::Unknown => false,
    }
}

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn is_zipcode(v: &str) -> bool {
    match v.split_once('-') {
        Some((five, four)) => {
            five.len() == 5 && all_digits(five) && four.len() == 4 && all_digits(four)
        }
        None => v.len() == 5 && all_digits(v),
    }
}

fn is_city_name(v: &str) -> bool {
    v.chars().next().is_some_and(|c| c.is_alphabetic())
        && v.chars()
            .all(|c| c.is_alphabetic() || matches!(c, ' ' | '.' | '\'' | '-'))
}

fn days_in_month(year: u32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if (year.is_multiple_of(4) && !year.is_multiple_of(100)) || year.is_multiple_of(400) => {
            29
        }
        2 => 28,
        _ => 0,
    }
}

fn valid_ymd(y: &str, m: &str, d: &str) -> bool {
    if !(all_digits(y) && all_digits(m) && all_digits(d))
        || y.len() != 4
        || m.len() != 2
        || d.len() != 2
    {
        return false;
    }
    let (y, m, d): (u32, u32, u32) = (y.parse().unwrap(), m.parse().unwrap(), d.parse().unwrap());
    (1..=12).contains(&m) && d >= 1 && d <= days_in_month(y, m)
}

/// `YYYY-MM-DD` or `MM/DD/YYYY`.
fn is_date(v: &str) -> bool {
    let dash: Vec<&str> = v.split('-').collect();
    if dash.len() == 3 {
        return valid_ymd(dash[0], dash[1], dash[2]);
    }
    let slash: Vec<&str> = v.split('/').collect();
    slash.len() == 3 && valid_ymd(slash[2], slash[0], slash[1])
}

/// Decimal amount with an optional leading `$` and at most two decimals.
fn is_price(v: &str) -> bool {
    let v = v.strip_prefix('$').unwrap_or(v);
    match v.split_once('.') {
        Some((whole, frac)) => {
            all_digits(whole) && (1..=2).contains(&frac.len()) && all_digits(frac)
        }
        None => all_digits(v),
    }
}

/// Name-token rules: per-type tokens and min/max range markers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamePatterns {
    pub type_tokens: BTreeMap<String, Vec<String>>,
    pub range_markers: RangeMarkers,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeMarkers {
    pub min: Vec<String>,
    pub max: Vec<String>,
}

impl Default for NamePatterns {
    fn default() -> Self {
        serde_json::from_str(PATTERNS).expect("bundled patterns parse")
    }
}

impl NamePatterns {
    pub fn load(path: &Path) -> Result<Self, SemanticsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SemanticsError::Lexicon(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| SemanticsError::Lexicon(format!("{}: {e}", path.display())))
    }

    /// Type whose token list contains `token`.
    pub fn type_for_token(&self, token: &str) -> Option<TypeTag> {
        self.type_tokens
            .iter()
            .find(|(_, toks)| toks.iter().any(|t| t == token))
            .and_then(|(k, _)| TypeTag::from_key(k))
    }
}
