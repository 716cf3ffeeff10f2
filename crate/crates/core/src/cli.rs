//! Command-line entry point.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::aggregate::{self, FormCorpusStats};
use crate::config::Config;
use crate::form_model::Method;
use crate::probing::{read_plan_jsonl, write_plan_jsonl};
use crate::simulator::{generate_site, serve, SiteKind, SiteSpec};
use crate::surfacer::{surface_site, Fetcher, HttpTransport, SystemClock};

#[derive(Debug, Parser)]
#[command(
    name = "deepsurf",
    version,
    about = "Surface deep-web forms as GET URLs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or serve simulated sites.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Compute a surfacing plan for the forms on a page.
    Surface(SurfaceArgs),
    /// Evaluate a plan against a simulated site.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Form-corpus statistics and services.
    #[command(subcommand)]
    Agg(AggCommand),
}

#[derive(Debug, Subcommand)]
enum SimCommand {
    /// Write a site specification.
    Gen {
        #[arg(long)]
        kind: SiteKind,
        #[arg(long)]
        records: usize,
        #[arg(long, default_value_t = 10)]
        page_size: usize,
        #[arg(long, default_value_t = 2000)]
        vocabulary: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Serve the form with POST instead of GET.
        #[arg(long)]
        post: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a site over HTTP until interrupted.
    Serve {
        #[arg(long)]
        site: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug, Args)]
struct SurfaceArgs {
    #[arg(long)]
    url: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    delay_ms: Option<u64>,
    #[arg(long)]
    max_fetches: Option<usize>,
    #[arg(long)]
    probe_budget: Option<usize>,
    #[arg(long)]
    page_limit: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    max_dims: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Ground-truth coverage of a plan file.
    Coverage {
        #[arg(long)]
        site: PathBuf,
        #[arg(long)]
        plan: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum AggCommand {
    /// Build statistics from a JSON Lines file of forms.
    Ingest {
        #[arg(long)]
        forms: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Synonyms {
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    Values {
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        name: String,
    },
    Autocomplete {
        #[arg(long)]
        stats: PathBuf,
        /// Comma-separated attribute names.
        #[arg(long, value_delimiter = ',', required = true)]
        names: Vec<String>,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
}

type CmdResult = Result<(), Box<dyn std::error::Error>>;

/// Runs the CLI. Returns 0 on success, 1 on operational errors and 2 on
/// usage errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::Sim(SimCommand::Gen {
            kind,
            records,
            page_size,
            vocabulary,
            seed,
            post,
            out,
        }) => {
            let mut spec = SiteSpec::new(kind, records, page_size, vocabulary, seed);
            if post {
                spec.method = Method::Post;
            }
            generate_site(&spec)?;
            emit(
                out.as_deref(),
                &(serde_json::to_string_pretty(&spec)? + "\n"),
            )
        }
        Command::Sim(SimCommand::Serve { site, port, host }) => {
            let site = Arc::new(load_site(&site)?);
            let server = serve(site, &format!("{host}:{port}"))?;
            println!("{}", json!({ "url": server.base_url() }));
            std::io::stdout().flush()?;
            server.join();
            Ok(())
        }
        Command::Surface(args) => surface(args),
        Command::Eval(EvalCommand::Coverage { site, plan }) => {
            let site = load_site(&site)?;
            let entries = read_plan_jsonl(BufReader::new(File::open(&plan)?))?;
            let urls: Vec<&str> = entries.iter().map(|e| e.url.as_str()).collect();
            let covered = site.covered_ids(&urls)?;
            let out = json!({
                "coverage": covered.len() as f64 / site.record_count() as f64,
                "covered": covered.len(),
                "records": site.record_count(),
                "urls": urls.len(),
            });
            emit(None, &format!("{out}\n"))
        }
        Command::Agg(AggCommand::Ingest { forms, out }) => {
            let mut stats = FormCorpusStats::new();
            for d in stats.ingest_jsonl(BufReader::new(File::open(&forms)?))? {
                log::warn!("{}: {d}", forms.display());
            }
            stats.save(&out)?;
            let summary =
                json!({ "forms": stats.forms_ingested(), "names": stats.name_frequency.len() });
            emit(None, &format!("{summary}\n"))
        }
        Command::Agg(AggCommand::Synonyms { stats, name, k }) => {
            let stats = FormCorpusStats::load(&stats)?;
            let out: Vec<_> = aggregate::synonyms(&name, &stats, k)
                .into_iter()
                .map(|(n, s)| json!({ "name": n, "score": s }))
                .collect();
            emit(None, &format!("{}\n", serde_json::Value::Array(out)))
        }
        Command::Agg(AggCommand::Values { stats, name }) => {
            let stats = FormCorpusStats::load(&stats)?;
            let out: Vec<_> = aggregate::values_for(&name, &stats)
                .into_iter()
                .map(|(v, c)| json!({ "value": v, "count": c }))
                .collect();
            emit(None, &format!("{}\n", serde_json::Value::Array(out)))
        }
        Command::Agg(AggCommand::Autocomplete { stats, names, k }) => {
            let stats = FormCorpusStats::load(&stats)?;
            let out: Vec<_> = aggregate::schema_autocomplete(&names, &stats, k)
                .into_iter()
                .map(|(n, s)| json!({ "name": n, "score": s }))
                .collect();
            emit(None, &format!("{}\n", serde_json::Value::Array(out)))
        }
    }
}

fn surface(args: SurfaceArgs) -> CmdResult {
    let mut config = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(v) = args.delay_ms {
        config.min_delay_ms = v;
    }
    if let Some(v) = args.max_fetches {
        config.max_fetches_per_site = v;
    }
    if let Some(v) = args.probe_budget {
        config.probe.budget = v;
    }
    if let Some(v) = args.page_limit {
        config.page_limit = v;
    }
    if let Some(v) = args.tau {
        config.tau = v;
    }
    if let Some(v) = args.max_dims {
        config.max_dims = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    config.validate()?;
    let options = config.surface_options()?;
    let policy = config.fetch_policy();
    let fetcher = Fetcher::new(
        Arc::new(HttpTransport::new(&policy)),
        policy,
        Arc::new(SystemClock::new()),
    );
    let (plan, report) = surface_site(&fetcher, &args.url, &options)?;
    match &args.out {
        Some(p) => write_plan_jsonl(&plan, BufWriter::new(File::create(p)?))?,
        None => write_plan_jsonl(&plan, std::io::stdout().lock())?,
    }
    if let Some(p) = &args.report {
        std::fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    log::info!(
        "{} urls, {} fetches, {} POST forms skipped",
        report.urls_emitted,
        report.fetches_made,
        report.skipped_post_forms
    );
    Ok(())
}

fn load_site(path: &Path) -> Result<crate::simulator::Site, Box<dyn std::error::Error>> {
    let spec: SiteSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(generate_site(&spec)?)
}

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
