//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line to
//! stderr (uncaptured) before asserting.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use deepsurf::aggregate::{ingest, schema_autocomplete, synonyms};
use deepsurf::form_model::parse_forms;
use deepsurf::probing::{independent_enumeration, PlanConfig, ProbeConfig};
use deepsurf::simulator::{SimTransport, Site, SiteKind, SiteSpec, TEXT_FIELD};
use deepsurf::surfacer::{signature, FakeClock, Fetcher};
use deepsurf::{FormInput, FormSpec, InputKind, Method};

use common::{fast_policy, site, surface, Run, HOST};

const C1_RUNTIME: Duration = Duration::from_secs(5);
const C2_COVERAGE: f64 = 0.90;
const C2_ORACLE_GAP: f64 = 0.10;
const C2_SUBMISSIONS: usize = 300;
const C2_RUNTIME: Duration = Duration::from_secs(60);
const C3_SIZES: [usize; 3] = [250, 500, 1000];
const C3_COVERAGE: f64 = 0.85;
const C3_NAIVE_SPACE: u64 = 1_000_000;
const C3_RUNTIME: Duration = Duration::from_secs(180);
const C4_OVERALL_VIOLATIONS: f64 = 0.05;
const C5_COVERAGE: f64 = 0.85;
const C7_DELAY_MS: f64 = 100.0;
const C8_TRUE_JACCARD: f64 = 0.10;
const C8_ESTIMATE: f64 = 0.25;
const C8_RUNTIME: Duration = Duration::from_secs(1);
const C9_PRECISION: f64 = 0.8;
const C9_RUNTIME: Duration = Duration::from_secs(5);

fn verdict(n: u32, pass: bool, detail: &str) {
    let line = format!(
        "criterion {n}: {} {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

fn search_plan(probe: ProbeConfig) -> PlanConfig {
    PlanConfig {
        probe,
        ..PlanConfig::default()
    }
}

fn large_budget() -> ProbeConfig {
    ProbeConfig {
        rounds: 100,
        per_round: 20,
        budget: 3000,
        ..ProbeConfig::default()
    }
}

fn range_site() -> Arc<Site> {
    site(&SiteSpec::new(SiteKind::Range, 72, 10, 500, 11))
}

fn run_c1() -> (Arc<Site>, Run) {
    let s = range_site();
    let run = surface(&s, PlanConfig::default(), fast_policy());
    (s, run)
}

fn c2_site() -> Arc<Site> {
    site(&SiteSpec::new(SiteKind::Search, 1000, 10, 2000, 7))
}

fn run_c2() -> (Arc<Site>, Run) {
    let s = c2_site();
    let mut policy = fast_policy();
    // The form page plus the submission allowance.
    policy.max_fetches_per_site = C2_SUBMISSIONS + 1;
    let probe = ProbeConfig {
        rounds: 100,
        per_round: 20,
        budget: C2_SUBMISSIONS - 10,
        ..ProbeConfig::default()
    };
    let run = surface(&s, search_plan(probe), policy);
    (s, run)
}

fn run_c3(n: usize) -> (Arc<Site>, Run) {
    let s = site(&SiteSpec::new(SiteKind::Search, n, 10, 2000, 7));
    let mut policy = fast_policy();
    policy.max_fetches_per_site = 100_000;
    let run = surface(&s, search_plan(large_budget()), policy);
    (s, run)
}

fn run_c5() -> (Arc<Site>, Run) {
    let s = site(&SiteSpec::new(SiteKind::DbSelect, 1000, 10, 2000, 5));
    let mut policy = fast_policy();
    policy.max_fetches_per_site = 100_000;
    let run = surface(&s, search_plan(large_budget()), policy);
    (s, run)
}

#[test]
fn criterion_1_range_correlation() {
    let start = Instant::now();
    let (s, run) = run_c1();
    let elapsed = start.elapsed();
    let home = s.form_page();
    let form = &parse_forms(&home, &format!("http://{HOST}/"))[0];
    let positions: Vec<usize> = ["min_price", "max_price"]
        .iter()
        .map(|n| form.position_of(n).unwrap())
        .collect();
    let naive = independent_enumeration(form, &positions).unwrap();
    let urls = run.urls();
    let naive_cov = s.covered_ids(&naive).unwrap();
    let plan_cov = s.covered_ids(&urls).unwrap();
    let mut listed: BTreeMap<u64, usize> = BTreeMap::new();
    for u in &urls {
        let pairs: Vec<(String, String)> = url::Url::parse(u)
            .unwrap()
            .query_pairs()
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect();
        for id in s.exposed_ids(&pairs).unwrap() {
            *listed.entry(id).or_default() += 1;
        }
    }
    let exactly_once = listed.len() == s.record_count() && listed.values().all(|&c| c == 1);
    let pass = naive.len() == 120
        && urls.len() == 10
        && naive_cov == plan_cov
        && exactly_once
        && elapsed < C1_RUNTIME;
    verdict(
        1,
        pass,
        &format!(
            "naive={} plan={} naive_cov={} plan_cov={} exactly_once={exactly_once} t={elapsed:.2?}",
            naive.len(),
            urls.len(),
            naive_cov.len(),
            plan_cov.len()
        ),
    );
}

/// Union of first result pages over every single-token query.
fn brute_force_oracle(s: &Site) -> f64 {
    let mut covered = BTreeSet::new();
    for w in s.vocabulary() {
        covered.extend(s.exposed_ids(&[(TEXT_FIELD.to_string(), w)]).unwrap());
    }
    covered.len() as f64 / s.record_count() as f64
}

#[test]
fn criterion_2_iterative_probing() {
    let oracle = brute_force_oracle(&c2_site());
    let start = Instant::now();
    let (s, run) = run_c2();
    let elapsed = start.elapsed();
    let coverage = s.coverage(&run.urls()).unwrap();
    let submissions = run.report.fetches_made - 1;
    let pass = coverage >= C2_COVERAGE
        && oracle - coverage <= C2_ORACLE_GAP
        && submissions <= C2_SUBMISSIONS
        && elapsed < C2_RUNTIME;
    verdict(
        2,
        pass,
        &format!(
            "coverage={coverage:.3} oracle={oracle:.3} submissions={submissions} urls={} t={elapsed:.2?}",
            run.urls().len()
        ),
    );
}

#[test]
fn criterion_3_url_proportionality() {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for n in C3_SIZES {
        let (s, run) = run_c3(n);
        let urls = run.urls().len();
        let coverage = s.coverage(&run.urls()).unwrap();
        let v = s.spec().vocabulary_size as u64;
        let naive = v + v * (v - 1) / 2;
        let bound = 3 * n / 10;
        pass &= urls <= bound && coverage >= C3_COVERAGE && naive > C3_NAIVE_SPACE;
        parts.push(format!(
            "N={n}: urls={urls}<={bound} coverage={coverage:.3} naive={naive}"
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < C3_RUNTIME;
    verdict(3, pass, &format!("{} t={elapsed:.2?}", parts.join("; ")));
}

#[test]
fn criterion_4_indexability() {
    let mut runs = vec![run_c1(), run_c5()];
    runs.extend(C3_SIZES.iter().map(|&n| run_c3(n)));
    let (mut observed, mut observed_bad, mut total, mut total_bad) = (0, 0, 0, 0);
    for (s, run) in &runs {
        let page = s.spec().page_size;
        for e in &run.plan.entries {
            let bad = !(1..=page).contains(&s.true_count(&e.url).unwrap());
            total += 1;
            total_bad += bad as usize;
            if e.estimated_result_count.is_some() {
                observed += 1;
                observed_bad += bad as usize;
            }
        }
    }
    let rate = total_bad as f64 / total as f64;
    let pass = observed > 0 && observed_bad == 0 && rate <= C4_OVERALL_VIOLATIONS;
    verdict(
        4,
        pass,
        &format!("observed={observed} observed_bad={observed_bad} total={total} total_bad={total_bad} rate={rate:.4}"),
    );
}

#[test]
fn criterion_5_database_selection() {
    let (s, run) = run_c5();
    let sets: Vec<(&String, BTreeSet<&String>)> = run
        .plan
        .keyword_sets
        .iter()
        .map(|(k, v)| (k, v.iter().collect()))
        .collect();
    let mut disjoint = true;
    for (i, (_, a)) in sets.iter().enumerate() {
        for (_, b) in &sets[i + 1..] {
            disjoint &= a.is_disjoint(b);
        }
    }
    let covered = s.covered_ids(&run.urls()).unwrap();
    let mut pass = disjoint && sets.len() == 4;
    let mut parts = Vec::new();
    for value in &s.spec().schema.categorical[0].values {
        let ids: Vec<u64> = s
            .records()
            .iter()
            .filter(|r| r.categories.first() == Some(value))
            .map(|r| r.id)
            .collect();
        let cov = ids.iter().filter(|i| covered.contains(i)).count() as f64 / ids.len() as f64;
        pass &= cov >= C5_COVERAGE;
        parts.push(format!("{value}={cov:.3}"));
    }
    verdict(
        5,
        pass,
        &format!(
            "sets={} disjoint={disjoint} {}",
            sets.len(),
            parts.join(" ")
        ),
    );
}

#[test]
fn criterion_6_post_skipping() {
    let mut spec = SiteSpec::new(SiteKind::Search, 200, 10, 500, 3);
    spec.method = Method::Post;
    let run = surface(&site(&spec), PlanConfig::default(), fast_policy());
    let pass = run.plan.entries.is_empty()
        && run.plan.templates.is_empty()
        && run.report.skipped_post_forms == 1
        && run.report.urls_emitted == 0;
    verdict(
        6,
        pass,
        &format!(
            "entries={} skipped_post_forms={} urls_emitted={} fetches={}",
            run.plan.entries.len(),
            run.report.skipped_post_forms,
            run.report.urls_emitted,
            run.report.fetches_made
        ),
    );
}

#[test]
fn criterion_7_politeness() {
    let a = site(&SiteSpec::new(SiteKind::Select, 300, 10, 500, 1));
    let b = range_site();
    let transport = SimTransport::new()
        .with_site("a.test", a)
        .with_site("b.test", b);
    let clock = Arc::new(FakeClock::new());
    let fetcher = Fetcher::new(Arc::new(transport), fast_policy(), clock);
    let options = deepsurf::surfacer::SurfaceOptions::default();
    let (_, ra) = deepsurf::surfacer::surface_site(&fetcher, "http://a.test/", &options).unwrap();
    let (_, rb) = deepsurf::surfacer::surface_site(&fetcher, "http://b.test/", &options).unwrap();
    // b.test was fetched last, so it waits; a.test must not wait behind it.
    fetcher.fetch("http://b.test/").unwrap();
    fetcher.fetch("http://a.test/").unwrap();
    let events = fetcher.events();
    let (eb, ea) = (&events[events.len() - 2], &events[events.len() - 1]);
    let cross_gap = ea.at_ms - eb.at_ms;

    let mut min_gap = f64::INFINITY;
    let mut pairs = 0;
    for report in [&ra, &rb] {
        for times in report.fetch_timestamps.values() {
            for w in times.windows(2) {
                min_gap = min_gap.min(w[1] - w[0]);
                pairs += 1;
            }
        }
    }
    for times in fetcher.timestamps_by_host().values() {
        for w in times.windows(2) {
            min_gap = min_gap.min(w[1] - w[0]);
            pairs += 1;
        }
    }
    let hosts = fetcher.timestamps_by_host().len();
    let pass = pairs > 0 && min_gap >= C7_DELAY_MS && hosts == 2 && cross_gap < C7_DELAY_MS;
    verdict(
        7,
        pass,
        &format!("hosts={hosts} same_host_pairs={pairs} min_gap_ms={min_gap} cross_host_gap_ms={cross_gap}"),
    );
}

/// Shingles computed directly from the generated word sequence.
fn oracle_shingles(words: &[String]) -> BTreeSet<Vec<String>> {
    if words.len() < 8 {
        return BTreeSet::from([words.to_vec()]);
    }
    words.windows(8).map(|w| w.to_vec()).collect()
}

fn jaccard(a: &BTreeSet<Vec<String>>, b: &BTreeSet<Vec<String>>) -> f64 {
    a.intersection(b).count() as f64 / a.union(b).count() as f64
}

fn page(words: &[String]) -> String {
    format!("<html><body><p>{}</p></body></html>", words.join(" "))
}

#[test]
fn criterion_8_signature_quality() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let dictionary: Vec<String> = (0..400).map(|i| format!("w{i}x")).collect();
    let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<String> {
        (0..n)
            .map(|_| dictionary.choose(rng).unwrap().clone())
            .collect()
    };
    let mut identical_ok = true;
    let (mut checked, mut worst) = (0, 0.0f64);
    let mut pass = true;
    for i in 0..60 {
        let len = rng.random_range(40..200);
        let a = draw(&mut rng, len);
        identical_ok &= signature(&page(&a)).similarity(&signature(&page(&a))) == 1.0;
        // Share a prefix of varying length, then diverge.
        let shared = rng.random_range(0..(a.len() / 8).max(1)) * (i % 3);
        let mut b = a[..shared].to_vec();
        let len = rng.random_range(40..200);
        b.extend(draw(&mut rng, len));
        let truth = jaccard(&oracle_shingles(&a), &oracle_shingles(&b));
        if truth <= C8_TRUE_JACCARD {
            let est = signature(&page(&a)).similarity(&signature(&page(&b)));
            worst = worst.max(est);
            pass &= est <= C8_ESTIMATE;
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    pass &= identical_ok && checked >= 30 && elapsed < C8_RUNTIME;
    verdict(
        8,
        pass,
        &format!("identical={identical_ok} low_jaccard_pairs={checked} max_estimate={worst:.3} t={elapsed:.2?}"),
    );
}

fn text_form(source: &str, names: &[&str]) -> FormSpec {
    FormSpec {
        site_host: source.to_string(),
        action: format!("http://{source}/search"),
        method: Method::Get,
        inputs: names
            .iter()
            .enumerate()
            .map(|(position, n)| FormInput {
                name: n.to_string(),
                kind: InputKind::TextBox,
                offered_values: Vec::new(),
                default_value: None,
                position,
            })
            .collect(),
        source_url: format!("http://{source}/"),
    }
}

/// 200 forms over three domains. Each synonym group contributes one of its
/// two spellings per form.
fn planted_corpus() -> (Vec<FormSpec>, Vec<(&'static str, &'static str)>) {
    let groups = [
        ("price", "cost"),
        ("zip", "postal_code"),
        ("city", "town"),
        ("author", "writer"),
        ("subject", "topic"),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut forms = Vec::new();
    for i in 0..200 {
        let pick = |rng: &mut ChaCha8Rng, g: usize| {
            if rng.random_bool(0.5) {
                groups[g].0
            } else {
                groups[g].1
            }
        };
        let mut names: Vec<&str> = match i % 10 {
            0..=3 => vec![
                "make",
                "model",
                "year",
                "mileage",
                pick(&mut rng, 0),
                pick(&mut rng, 1),
            ],
            4..=6 => vec![
                "title",
                "isbn",
                "publisher",
                pick(&mut rng, 3),
                pick(&mut rng, 4),
            ],
            _ => vec![
                "bedrooms",
                "bathrooms",
                pick(&mut rng, 0),
                pick(&mut rng, 1),
                pick(&mut rng, 2),
            ],
        };
        if rng.random_bool(0.3) {
            names.push(["keywords", "sort", "color", "condition"][rng.random_range(0..4)]);
        }
        forms.push(text_form(&format!("site{i}.test"), &names));
    }
    (forms, groups.to_vec())
}

#[test]
fn criterion_9_aggregate_services() {
    let start = Instant::now();
    let (forms, groups) = planted_corpus();
    let stats = ingest(&forms);
    let mut correct = 0;
    let mut queried = 0;
    for (a, b) in &groups {
        for (q, want) in [(a, b), (b, a)] {
            queried += 1;
            if synonyms(q, &stats, 1)
                .first()
                .is_some_and(|(n, _)| n == want)
            {
                correct += 1;
            }
        }
    }
    let precision = correct as f64 / queried as f64;
    let top3: Vec<String> = schema_autocomplete(&["make", "model"], &stats, 3)
        .into_iter()
        .map(|(n, _)| n)
        .collect();
    let planted = top3.iter().any(|n| n == "year") && top3.iter().any(|n| n == "mileage");
    let elapsed = start.elapsed();
    let pass = precision >= C9_PRECISION && planted && elapsed < C9_RUNTIME;
    verdict(
        9,
        pass,
        &format!("top1_precision={precision:.2} ({correct}/{queried}) autocomplete_top3={top3:?} t={elapsed:.2?}"),
    );
}

#[test]
fn criterion_10_determinism() {
    type Rerun = fn() -> Vec<u8>;
    let runs: Vec<(&str, Rerun)> = vec![
        ("c1", || run_c1().1.jsonl()),
        ("c2", || run_c2().1.jsonl()),
        ("c3", || {
            C3_SIZES.iter().flat_map(|&n| run_c3(n).1.jsonl()).collect()
        }),
        ("c5", || run_c5().1.jsonl()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, f) in runs {
        let (first, second) = (f(), f());
        let same = !first.is_empty() && first == second;
        pass &= same;
        parts.push(format!(
            "{name}={}",
            if same { "identical" } else { "differs" }
        ));
    }
    verdict(
        10,
        pass,
        &format!("{} (c4 reuses the c1, c3 and c5 plans)", parts.join(" ")),
    );
}
