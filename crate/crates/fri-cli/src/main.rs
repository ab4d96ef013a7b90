//! `fri`: relationship graph sets from market data, scored with four
//! downstream-independent indicators.
//!
//! Subcommands: `ingest` normalizes raw inputs, `build` constructs a
//! graph set (news, corr, or static variant), `eval` writes the report
//! JSON plus a comparison-table row, `case-study` dumps one pair's
//! rolling correlation alongside its edge events, and `synth` generates
//! a market with planted relationship events.
//!
//! A single master `--seed` (overridden by the `FRI_SEED` environment
//! variable) drives every randomized stage; reports are byte-identical
//! across reruns and `--jobs` settings.

use std::collections::BTreeMap;
use std::fs;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use fri_core::graph::{build_corr_graphset, build_news_graphset, build_static_graphset};
use fri_core::market::{
    compute_log_returns, load_news, load_prices, write_news, write_prices, NewsRecord,
};
use fri_core::report::{
    table_csv, FactorSection, FriReport, IndicatorOutcome, ReportMetadata, SCHEMA_VERSION,
};
use fri_core::synth::{self, SynthConfig};
use fri_core::{aecr, css, dcc, factor, rolling};
use fri_core::{FriError, GraphSet, DEFAULT_ALPHA, DEFAULT_EPSILON, DEFAULT_THETA};

#[derive(Parser)]
#[command(
    name = "fri",
    version,
    about = "Relationship graph construction and indicator evaluation for stock universes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize raw price and news files into the canonical formats.
    Ingest(IngestArgs),
    /// Construct a relationship graph set and write it as JSONL.
    Build(BuildArgs),
    /// Score a graph set with CSS, AECR, delta-beta, and delta-DCC.
    Eval(EvalArgs),
    /// Emit per-day rolling correlation and edge data for one pair.
    CaseStudy(CaseStudyArgs),
    /// Generate a synthetic market with planted relationship events.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Raw price CSV with header date,ticker,adj_close.
    #[arg(long)]
    prices: PathBuf,
    /// Raw news JSONL; off-calendar dates are remapped to the next
    /// trading day or dropped past the calendar end.
    #[arg(long)]
    news: Option<PathBuf>,
    /// Directory receiving prices.csv and news.jsonl.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    /// Per-day news co-occurrence graph thresholded at tau.
    News,
    /// Trailing rolling-correlation graph thresholded at theta.
    Corr,
    /// Whole-period co-occurrence base held constant on every day.
    Static,
}

impl Variant {
    fn name(self) -> &'static str {
        match self {
            Variant::News => "news",
            Variant::Corr => "corr",
            Variant::Static => "static",
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    prices: PathBuf,
    /// News JSONL; required by the news and static variants.
    #[arg(long)]
    news: Option<PathBuf>,
    #[arg(long, value_enum)]
    variant: Variant,
    /// Co-occurrence count threshold: an edge needs more than tau hits.
    #[arg(long, default_value_t = 0)]
    tau: u32,
    /// Absolute-correlation edge threshold for the corr variant.
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
    /// Rolling window length in trading days (corr variant).
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: usize,
    /// Output graph JSONL; a .meta.json sidecar records the variant.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Indicator {
    Css,
    Aecr,
    Factor,
    Dcc,
}

#[derive(Args)]
struct EvalArgs {
    /// Graph set JSONL, typically produced by `fri build`.
    #[arg(long)]
    graph: PathBuf,
    /// Price CSV covering the graph calendar plus its node universe.
    #[arg(long)]
    prices: PathBuf,
    /// Rolling window length in trading days.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: usize,
    /// Significance level of the per-day correlation stability test.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Master seed; FRI_SEED overrides it when set.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pairs sampled when constructing the HML factor.
    #[arg(long, default_value_t = 1200)]
    n_construct: usize,
    /// Pairs sampled for the group regressions and the DCC contrast.
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    /// Number of regression groups.
    #[arg(long, default_value_t = 10)]
    groups: usize,
    /// High-group threshold as a fraction of the maximum edge count.
    #[arg(long, default_value_t = 0.7)]
    phi_h: f64,
    /// Low-group threshold as a fraction of the maximum edge count.
    #[arg(long, default_value_t = 0.3)]
    phi_l: f64,
    /// Comma-separated subset of indicators to run; others are skipped.
    #[arg(long, value_enum, value_delimiter = ',')]
    only: Option<Vec<Indicator>>,
    /// Worker threads for intra-indicator parallelism; 0 uses all cores.
    /// Output does not depend on this value.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Record wall seconds per indicator in the report. Off by default
    /// so reruns stay byte-identical.
    #[arg(long)]
    timing: bool,
    /// Report JSON path.
    #[arg(long)]
    out_report: PathBuf,
    /// Comparison-table CSV; appends a row when the file exists, so a
    /// variant batch accumulates one table.
    #[arg(long)]
    out_table: Option<PathBuf>,
}

#[derive(Args)]
struct CaseStudyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    prices: PathBuf,
    /// Pair as two comma-separated tickers, e.g. AAPL,JPM.
    #[arg(long, value_parser = parse_pair)]
    pair: (String, String),
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: usize,
    /// Output CSV with columns t,date,corr,mu,event_id.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory receiving prices.csv, news.jsonl, truth.jsonl, and
    /// config.json (the generator config plus planted event windows).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    tickers: usize,
    #[arg(long, default_value_t = 300)]
    days: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: usize,
    /// Number of pairs receiving planted co-movement events.
    #[arg(long, default_value_t = 30)]
    event_pairs: usize,
    /// Shortest planted event length in trading days.
    #[arg(long, default_value_t = 5)]
    len_min: usize,
    /// Longest planted event length in trading days.
    #[arg(long, default_value_t = 32)]
    len_max: usize,
    /// In-event common-factor loading; event correlation is its square.
    #[arg(long, default_value_t = 0.8)]
    corr_boost: f64,
    /// Simulate GARCH(1,1) idiosyncratic legs instead of i.i.d. noise.
    #[arg(long)]
    garch_legs: bool,
    /// Expected co-occurrence count per event day.
    #[arg(long, default_value_t = 1.0)]
    news_rate: f64,
    /// Expected spurious co-occurrence count per pair per day.
    #[arg(long, default_value_t = 1e-5)]
    bg_rate: f64,
    /// Master seed; FRI_SEED overrides it when set.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Build(a) => cmd_build(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::CaseStudy(a) => cmd_case_study(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn cmd_ingest(args: &IngestArgs) -> anyhow::Result<ExitCode> {
    fs::create_dir_all(&args.out)?;
    let load = load_prices(&args.prices)?;
    let out_prices = args.out.join("prices.csv");
    write_prices(&load.panel, &out_prices)?;
    println!(
        "prices: {} tickers x {} days -> {}",
        load.panel.n_tickers(),
        load.panel.n_days(),
        out_prices.display()
    );
    for (ticker, rows) in &load.dropped_tickers {
        println!("  dropped {ticker} ({rows} rows, incomplete calendar)");
    }
    if let Some(news_path) = &args.news {
        let news = load_news(news_path, load.panel.tickers(), load.panel.calendar())?;
        let out_news = args.out.join("news.jsonl");
        write_news(&news.records, &out_news)?;
        println!(
            "news: {} records ({} remapped to the next trading day, {} dropped past calendar end) -> {}",
            news.records.len(),
            news.remapped_dates,
            news.dropped_after_end,
            out_news.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

/// Whole-period co-occurrence counts thresholded at tau and normalized
/// by the maximum kept count: the base edge set of the static variant.
fn aggregate_base(
    news: &[NewsRecord],
    universe: &[String],
    tau: u32,
) -> (Vec<String>, BTreeMap<(u32, u32), f64>) {
    let mut nodes: Vec<String> = universe.to_vec();
    nodes.sort();
    nodes.dedup();
    let index: BTreeMap<&str, u32> = nodes
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    let mut counts: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for record in news {
        let mut ids: Vec<u32> = record
            .tickers
            .iter()
            .filter_map(|s| index.get(s.as_str()).copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        for (a, &i) in ids.iter().enumerate() {
            for &j in &ids[a + 1..] {
                *counts.entry((i, j)).or_insert(0) += 1;
            }
        }
    }
    let kept: BTreeMap<(u32, u32), u64> = counts
        .into_iter()
        .filter(|&(_, k)| k > u64::from(tau))
        .collect();
    let max = kept.values().copied().max().unwrap_or(0) as f64;
    let base = kept
        .into_iter()
        .map(|(key, k)| (key, k as f64 / max))
        .collect();
    (nodes, base)
}

fn cmd_build(args: &BuildArgs) -> anyhow::Result<ExitCode> {
    let prices = load_prices(&args.prices)?;
    let panel = prices.panel;
    let news = match &args.news {
        Some(path) => Some(load_news(path, panel.tickers(), panel.calendar())?.records),
        None => None,
    };
    let gs = match args.variant {
        Variant::News => {
            let news = news.as_deref().context("--variant news requires --news")?;
            build_news_graphset(news, panel.tickers(), panel.calendar(), args.tau)?
        }
        Variant::Corr => {
            let returns = compute_log_returns(&panel)?;
            build_corr_graphset(&returns, panel.calendar(), args.epsilon, args.theta)?
        }
        Variant::Static => {
            let news = news
                .as_deref()
                .context("--variant static requires --news (period co-occurrence base)")?;
            let (nodes, base) = aggregate_base(news, panel.tickers(), args.tau);
            build_static_graphset(&nodes, &base, panel.calendar())?
        }
    };
    gs.write_jsonl(&args.out)?;
    let meta = match args.variant {
        Variant::News => json!({ "variant": "news", "tau": args.tau }),
        Variant::Corr => {
            json!({ "variant": "corr", "theta": args.theta, "epsilon": args.epsilon })
        }
        Variant::Static => json!({ "variant": "static", "tau": args.tau }),
    };
    write_json(&meta_path(&args.out), &meta)?;
    let edge_days: usize = (0..gs.n_days()).map(|t| gs.edges_at(t).len()).sum();
    println!(
        "{}: {} nodes, {} days, {} edge-days -> {}",
        args.variant.name(),
        gs.nodes().len(),
        gs.n_days(),
        edge_days,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Sidecar path recording how a graph file was built.
fn meta_path(graph: &Path) -> PathBuf {
    let mut s = graph.as_os_str().to_os_string();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn sha256_hex(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn resolve_seed(flag: u64) -> anyhow::Result<u64> {
    match std::env::var("FRI_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .with_context(|| format!("FRI_SEED {s:?} is not a u64")),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(e).context("reading FRI_SEED"),
    }
}

/// Hard errors become report entries rather than aborting the run; an
/// undefined factor (for example on a constant graph) is the documented
/// not-applicable case.
fn outcome<T>(r: fri_core::Result<T>) -> IndicatorOutcome<T> {
    match r {
        Ok(result) => IndicatorOutcome::Computed { result },
        Err(FriError::FactorUndefined(reason)) => IndicatorOutcome::NotApplicable { reason },
        Err(e) => IndicatorOutcome::Failed {
            error: e.to_string(),
        },
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn cmd_eval(args: &EvalArgs) -> anyhow::Result<ExitCode> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build_global()
        .context("initializing the worker pool")?;
    let seed = resolve_seed(args.seed)?;
    let prices = load_prices(&args.prices)?;
    let returns = compute_log_returns(&prices.panel)?;
    let gs = GraphSet::read_jsonl(&args.graph, Some(prices.panel.tickers().to_vec()))?;
    gs.check_returns_alignment(&returns)?;

    let meta: Option<serde_json::Value> = fs::read_to_string(meta_path(&args.graph))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok());
    let graph_variant = meta
        .as_ref()
        .and_then(|m| m["variant"].as_str())
        .map(str::to_string)
        .unwrap_or_else(|| {
            args.graph
                .file_stem()
                .map_or_else(|| "graph".into(), |s| s.to_string_lossy().into_owned())
        });
    let mut dataset_hashes = BTreeMap::new();
    dataset_hashes.insert("graph".to_string(), sha256_hex(&args.graph)?);
    dataset_hashes.insert("prices".to_string(), sha256_hex(&args.prices)?);
    let metadata = ReportMetadata {
        graph_variant,
        tau: meta.as_ref().and_then(|m| m["tau"].as_u64()),
        epsilon: args.epsilon,
        theta: meta.as_ref().and_then(|m| m["theta"].as_f64()),
        alpha: args.alpha,
        seed,
        dataset_hashes,
    };

    let wanted = |i: Indicator| args.only.as_ref().is_none_or(|v| v.contains(&i));
    let mut timing: BTreeMap<String, f64> = BTreeMap::new();

    let css_out = if wanted(Indicator::Css) {
        let t0 = Instant::now();
        let out = outcome(css::css(&gs, &returns, args.epsilon, args.alpha, seed));
        timing.insert("css".into(), t0.elapsed().as_secs_f64());
        out
    } else {
        IndicatorOutcome::Skipped
    };
    let aecr_out = if wanted(Indicator::Aecr) {
        let t0 = Instant::now();
        let out = outcome(aecr::aecr(&gs, &returns, args.epsilon));
        timing.insert("aecr".into(), t0.elapsed().as_secs_f64());
        out
    } else {
        IndicatorOutcome::Skipped
    };
    let factor_out = if wanted(Indicator::Factor) {
        let t0 = Instant::now();
        let out = outcome(
            factor::construct_hml_factor(
                &gs,
                &returns,
                args.epsilon,
                args.n_construct,
                args.phi_h,
                args.phi_l,
                seed,
            )
            .and_then(|f| {
                let test = factor::test_hml_factor(
                    &gs,
                    &returns,
                    &f,
                    args.epsilon,
                    args.n_test,
                    args.groups,
                    seed,
                )?;
                Ok(FactorSection::new(&f, test))
            }),
        );
        timing.insert("factor".into(), t0.elapsed().as_secs_f64());
        out
    } else {
        IndicatorOutcome::Skipped
    };
    let dcc_out = if wanted(Indicator::Dcc) {
        let t0 = Instant::now();
        let out = outcome(dcc::delta_dcc(
            &gs,
            &returns,
            seed,
            args.n_test,
            args.phi_h,
            args.phi_l,
        ));
        timing.insert("dcc".into(), t0.elapsed().as_secs_f64());
        out
    } else {
        IndicatorOutcome::Skipped
    };

    let report = FriReport {
        schema_version: SCHEMA_VERSION,
        metadata,
        css: css_out,
        aecr: aecr_out,
        factor: factor_out,
        dcc: dcc_out,
        timing: args.timing.then_some(timing),
    };
    fs::write(&args.out_report, report.to_json())
        .with_context(|| format!("writing {}", args.out_report.display()))?;
    let row = report.table_row();
    if let Some(path) = &args.out_table {
        let full = table_csv(std::slice::from_ref(&row));
        let (_, body) = full.split_once('\n').expect("table has a header line");
        if path.exists() {
            let mut f = OpenOptions::new().append(true).open(path)?;
            f.write_all(body.as_bytes())?;
        } else {
            fs::write(path, full)?;
        }
    }
    println!(
        "variant={} css={} aecr={} delta_beta={} delta_dcc={} -> {}",
        row.variant,
        cell(row.css),
        cell(row.aecr),
        cell(row.delta_beta),
        cell(row.delta_dcc),
        args.out_report.display()
    );
    if report.all_completed() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "one or more indicators failed; details in {}",
            args.out_report.display()
        );
        Ok(ExitCode::from(1))
    }
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    match s.split(',').collect::<Vec<_>>()[..] {
        [a, b] if !a.trim().is_empty() && !b.trim().is_empty() => {
            Ok((a.trim().to_string(), b.trim().to_string()))
        }
        _ => Err("expected two comma-separated tickers, e.g. AAPL,JPM".into()),
    }
}

fn cmd_case_study(args: &CaseStudyArgs) -> anyhow::Result<ExitCode> {
    let prices = load_prices(&args.prices)?;
    let returns = compute_log_returns(&prices.panel)?;
    let gs = GraphSet::read_jsonl(&args.graph, Some(prices.panel.tickers().to_vec()))?;
    gs.check_returns_alignment(&returns)?;
    let (a, b) = &args.pair;
    let es = gs.edge_series(a, b)?;
    let series = rolling::rolling_corr(&returns, a, b, args.epsilon)?;
    let periods = aecr::detect_event_periods(&es);
    let mut out = String::from("t,date,corr,mu,event_id\n");
    for t in 0..gs.n_days() {
        let corr = series
            .at_day(t)
            .map_or_else(String::new, |c| c.to_string());
        let event_id = periods
            .iter()
            .position(|p| (p.t_start..p.t_start + p.length).contains(&t))
            .map_or(0, |i| i + 1);
        out.push_str(&format!(
            "{t},{},{corr},{},{event_id}\n",
            gs.calendar().date_of(t),
            u8::from(es.mu[t]),
        ));
    }
    fs::write(&args.out, out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "pair {a},{b}: {} days, {} event periods -> {}",
        gs.n_days(),
        periods.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(args: &SynthArgs) -> anyhow::Result<ExitCode> {
    let config = SynthConfig {
        n_tickers: args.tickers,
        n_days: args.days,
        epsilon: args.epsilon,
        n_event_pairs: args.event_pairs,
        event_length_range: (args.len_min, args.len_max),
        corr_boost: args.corr_boost,
        garch_legs: args.garch_legs,
        news_rate_in_event: args.news_rate,
        news_rate_background: args.bg_rate,
        seed: resolve_seed(args.seed)?,
    };
    let out = synth::generate(&config)?;
    fs::create_dir_all(&args.out)?;
    write_prices(&out.prices, &args.out.join("prices.csv"))?;
    write_news(&out.news, &args.out.join("news.jsonl"))?;
    let truth_path = args.out.join("truth.jsonl");
    out.truth.write_jsonl(&truth_path)?;
    write_json(&meta_path(&truth_path), &json!({ "variant": "news", "tau": 0 }))?;
    write_json(
        &args.out.join("config.json"),
        &json!({ "config": &config, "events": &out.events }),
    )?;
    println!(
        "synthetic market: {} tickers x {} days, {} planted events, {} news records -> {}",
        config.n_tickers,
        config.n_days,
        out.events.len(),
        out.news.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
