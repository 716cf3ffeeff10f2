use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::Duration;

use deepsurf::probing::{read_plan_jsonl, PlanConfig};
use deepsurf::simulator::{generate_site, serve, SiteKind, SiteSpec};
use deepsurf::surfacer::{
    surface_site, FetchPolicy, Fetcher, HttpTransport, SurfaceOptions, SystemClock,
};
use deepsurf::{FormInput, FormSpec, InputKind, Method};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deepsurf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn quick_policy() -> FetchPolicy {
    FetchPolicy {
        min_delay_per_host: Duration::from_millis(1),
        ..FetchPolicy::default()
    }
}

#[test]
fn surfacing_over_http_matches_ground_truth() {
    let site = Arc::new(generate_site(&SiteSpec::new(SiteKind::Range, 72, 10, 500, 11)).unwrap());
    let server = serve(Arc::clone(&site), "127.0.0.1:0").unwrap();
    let policy = quick_policy();
    let fetcher = Fetcher::new(
        Arc::new(HttpTransport::new(&policy)),
        policy,
        Arc::new(SystemClock::new()),
    );
    let options = SurfaceOptions {
        plan: PlanConfig::default(),
        ..SurfaceOptions::default()
    };
    let (plan, report) = surface_site(&fetcher, &server.base_url(), &options).unwrap();
    let urls: Vec<String> = plan.entries.iter().map(|e| e.url.clone()).collect();
    assert_eq!(urls.len(), 10);
    assert_eq!(site.coverage(&urls).unwrap(), 1.0);
    assert_eq!(report.fetch_failures, 0);
    assert!(fetcher
        .events()
        .iter()
        .all(|e| e.ok && !e.url.contains("__truth")));
    server.shutdown();
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn cli_generates_surfaces_and_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("site.json");
    let plan_path = dir.path().join("plan.jsonl");
    let report_path = dir.path().join("report.json");
    let config_path = dir.path().join("config.json");

    let out = bin(&[
        "sim",
        "gen",
        "--kind",
        "range",
        "--records",
        "72",
        "--seed",
        "11",
        "--out",
        spec_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let spec: SiteSpec =
        serde_json::from_str(&std::fs::read_to_string(&spec_path).unwrap()).unwrap();
    let server = serve(Arc::new(generate_site(&spec).unwrap()), "127.0.0.1:0").unwrap();
    write(
        &config_path,
        r#"{"min_delay_ms": 1, "probe": {"budget": 50}}"#,
    );
    let out = bin(&[
        "surface",
        "--url",
        &server.base_url(),
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        plan_path.to_str().unwrap(),
        "--report",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let entries = read_plan_jsonl(std::io::BufReader::new(
        std::fs::File::open(&plan_path).unwrap(),
    ))
    .unwrap();
    assert_eq!(entries.len(), 10);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["urls_emitted"], 10);

    let out = bin(&[
        "eval",
        "coverage",
        "--site",
        spec_path.to_str().unwrap(),
        "--plan",
        plan_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result["coverage"], 1.0);
    assert_eq!(result["covered"], 72);
    assert_eq!(result["urls"], 10);
    server.shutdown();
}

#[test]
fn exit_codes() {
    assert_eq!(code(&bin(&[])), 2);
    assert_eq!(code(&bin(&["surface"])), 2);
    assert_eq!(
        code(&bin(&["sim", "gen", "--kind", "nope", "--records", "5"])),
        2
    );
    assert_eq!(code(&bin(&["--help"])), 0);
    assert_eq!(code(&bin(&["--version"])), 0);
    assert_eq!(
        code(&bin(&[
            "eval",
            "coverage",
            "--site",
            "/nonexistent",
            "--plan",
            "/nonexistent"
        ])),
        1
    );
    assert_eq!(
        code(&bin(&["sim", "gen", "--kind", "search", "--records", "0"])),
        1
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    write(&bad, r#"{"delay": 3}"#);
    let out = bin(&[
        "surface",
        "--url",
        "http://127.0.0.1:9/",
        "--config",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("delay"));
}

#[test]
fn unreachable_site_is_an_operational_error() {
    let out = bin(&["surface", "--url", "http://127.0.0.1:9/", "--delay-ms", "1"]);
    assert_eq!(code(&out), 1);
}

fn form(source: &str, names: &[&str]) -> FormSpec {
    FormSpec {
        site_host: source.to_string(),
        action: format!("http://{source}/s"),
        method: Method::Get,
        inputs: names
            .iter()
            .enumerate()
            .map(|(position, n)| FormInput {
                name: n.to_string(),
                kind: if *n == "make" {
                    InputKind::SelectMenu
                } else {
                    InputKind::TextBox
                },
                offered_values: if *n == "make" {
                    vec!["ford".into(), "honda".into()]
                } else {
                    Vec::new()
                },
                default_value: None,
                position,
            })
            .collect(),
        source_url: format!("http://{source}/"),
    }
}

#[test]
fn aggregate_commands_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let forms_path = dir.path().join("forms.jsonl");
    let stats_path = dir.path().join("stats.json");
    let mut lines = String::new();
    for i in 0..20 {
        let price = if i % 2 == 0 { "price" } else { "cost" };
        let f = form(&format!("s{i}.test"), &["make", "model", "year", price]);
        lines.push_str(&serde_json::to_string(&f).unwrap());
        lines.push('\n');
    }
    lines.push_str("not json\n");
    write(&forms_path, &lines);

    let out = bin(&[
        "agg",
        "ingest",
        "--forms",
        forms_path.to_str().unwrap(),
        "--out",
        stats_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["forms"], 20);

    let stats = stats_path.to_str().unwrap();
    let out = bin(&[
        "agg", "synonyms", "--stats", stats, "--name", "price", "--k", "1",
    ]);
    let top: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(top[0]["name"], "cost");

    let out = bin(&["agg", "values", "--stats", stats, "--name", "Make"]);
    let values: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(values.as_array().unwrap().len(), 2);
    assert_eq!(values[0]["count"], 20);

    let out = bin(&[
        "agg",
        "autocomplete",
        "--stats",
        stats,
        "--names",
        "make,model",
        "--k",
        "1",
    ]);
    let top: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(top[0]["name"], "year");
}
