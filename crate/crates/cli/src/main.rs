mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use infoflow::ingest::{load_prices_csv, load_sentiment_csv, write_prices_csv, write_sentiment_csv, Loaded};
use infoflow::pipeline::{prepare_ticker, run_pipeline, MarketData, PipelineConfig};
use infoflow::report::{emit_report, from_json, AnalysisMode, OutputFormat, PipelineReport};
use infoflow::synth::{market_series, GeneratorKind, GeneratorSpec};
use infoflow::{rng, Error, Result};

use config::RunConfig;

/// Environment variable holding the worker-thread count.
const WORKERS_ENV: &str = "INFOFLOW_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "infoflow", version, about = "Linear and nonlinear causality between social-media activity and returns")]
struct Cli {
    /// TOML run file (paths, output, [analysis] settings); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate the input files and print a per-ticker summary.
    Ingest(InputArgs),
    /// Run the lag scans, BDS gates and net flows and write the report.
    Analyze(AnalyzeArgs),
    /// Run only the functional-form sweep (with the linear scan it builds on).
    SweepForms(AnalyzeArgs),
    /// Write synthetic sentiment and price files with known coupling.
    Synth(SynthArgs),
    /// Re-render tables from a saved report.json.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    #[arg(long)]
    sentiment: Option<PathBuf>,
    #[arg(long)]
    prices: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated output formats.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<Format>>,
    /// Comma-separated tickers (default: all).
    #[arg(long, value_delimiter = ',')]
    tickers: Option<Vec<String>>,
    #[arg(long)]
    start: Option<chrono::NaiveDate>,
    #[arg(long)]
    end: Option<chrono::NaiveDate>,
    #[arg(long)]
    max_lag: Option<usize>,
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Also run the functional-form sweep.
    #[arg(long)]
    sweep_forms: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// `NAME=KIND`, repeatable. Kinds: iid, linear, linear-reverse, quadratic, abs, logistic, garch.
    #[arg(long = "ticker", required = true)]
    tickers: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// A report.json written by `analyze`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<Format>>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Format {
    Tsv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Tsv => OutputFormat::Tsv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Mode {
    Linear,
    Nonlinear,
    Both,
}

impl From<Mode> for AnalysisMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Linear => AnalysisMode::Linear,
            Mode::Nonlinear => AnalysisMode::Nonlinear,
            Mode::Both => AnalysisMode::Both,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match configure_workers().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn configure_workers() -> Result<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Ingest(args) => ingest(&file, &args),
        Command::Analyze(args) => analyze(&file, &args, false),
        Command::SweepForms(args) => analyze(&file, &args, true),
        Command::Synth(args) => synth(&args),
        Command::Report(args) => rerender(&args),
    }
}

fn input_paths(file: &RunConfig, args: &InputArgs) -> Result<(PathBuf, PathBuf)> {
    let pick = |flag: &Option<PathBuf>, cfg: &Option<PathBuf>, name: &str| {
        flag.clone()
            .or_else(|| cfg.clone())
            .ok_or_else(|| Error::Config(format!("no {name} file: pass --{name} or set `{name}` in the config")))
    };
    Ok((pick(&args.sentiment, &file.sentiment, "sentiment")?, pick(&args.prices, &file.prices, "prices")?))
}

fn warn_rejections<T>(what: &Path, loaded: &Loaded<T>) {
    if let Some(report) = loaded.rejection_report() {
        eprintln!("warning: {} row(s) rejected in {}:\n{report}", loaded.rejected.len(), what.display());
    }
}

fn load_market(file: &RunConfig, args: &InputArgs) -> Result<MarketData> {
    let (sentiment, prices) = input_paths(file, args)?;
    let activity = load_sentiment_csv(&sentiment)?;
    warn_rejections(&sentiment, &activity);
    let price = load_prices_csv(&prices)?;
    warn_rejections(&prices, &price);
    Ok(MarketData { activity: activity.series, prices: price.series })
}

fn ingest(file: &RunConfig, args: &InputArgs) -> Result<()> {
    let data = load_market(file, args)?;
    let cfg = &file.analysis;
    let mut out = std::io::stdout().lock();
    writeln!(out, "ticker\ttrading_days\tfirst\tlast\tcoverage\tbullish_total\tstatus")?;
    let symbols: std::collections::BTreeSet<&String> = data.activity.keys().chain(data.prices.keys()).collect();
    for symbol in symbols {
        let line = match (data.activity.get(symbol), data.prices.get(symbol)) {
            (Some(a), Some(p)) => match prepare_ticker(a, p, cfg.start, cfg.end) {
                Ok(t) => format!(
                    "{symbol}\t{}\t{}\t{}\t{:.3}\t{}\tok",
                    t.pair.len(),
                    t.pair.dates[0],
                    t.pair.dates[t.pair.len() - 1],
                    t.coverage,
                    t.pair.driver.iter().sum::<f64>()
                ),
                Err(e) => format!("{symbol}\t\t\t\t\t\t{e}"),
            },
            (None, _) => format!("{symbol}\t\t\t\t\t\tno sentiment rows"),
            (_, None) => format!("{symbol}\t\t\t\t\t\tno price rows"),
        };
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn analysis_config(base: &PipelineConfig, args: &AnalyzeArgs, forms_only: bool) -> PipelineConfig {
    let mut cfg = base.clone();
    if let Some(t) = &args.tickers {
        cfg.tickers = t.clone();
    }
    cfg.start = args.start.or(cfg.start);
    cfg.end = args.end.or(cfg.end);
    cfg.max_lag = args.max_lag.unwrap_or(cfg.max_lag);
    cfg.permutations = args.permutations.unwrap_or(cfg.permutations);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.alpha = args.alpha.unwrap_or(cfg.alpha);
    if let Some(m) = args.mode {
        cfg.mode = m.into();
    }
    cfg.sweep_forms |= args.sweep_forms;
    if forms_only {
        cfg.mode = AnalysisMode::Linear;
        cfg.sweep_forms = true;
    }
    cfg
}

fn formats(flag: &Option<Vec<Format>>, file: &Option<Vec<OutputFormat>>) -> Vec<OutputFormat> {
    match (flag, file) {
        (Some(f), _) => f.iter().map(|&x| x.into()).collect(),
        (None, Some(f)) => f.clone(),
        (None, None) => vec![OutputFormat::Tsv, OutputFormat::Json],
    }
}

fn analyze(file: &RunConfig, args: &AnalyzeArgs, forms_only: bool) -> Result<()> {
    let cfg = analysis_config(&file.analysis, args, forms_only);
    cfg.validate()?;
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| file.out_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out-dir or set `out_dir` in the config".into()))?;
    let data = load_market(file, &args.input)?;
    let report = run_pipeline(&data, &cfg)?;
    finish(&report, &out_dir, &formats(&args.format, &file.formats))
}

fn finish(report: &PipelineReport, out_dir: &Path, formats: &[OutputFormat]) -> Result<()> {
    let paths = emit_report(report, out_dir, formats)?;
    for p in &paths {
        println!("{}", p.display());
    }
    for f in &report.failures {
        eprintln!("warning: {}: {}", f.ticker, f.error);
    }
    match (report.tickers.is_empty(), report.failures.first()) {
        (true, Some(f)) => Err(match f.exit_code {
            3 => Error::NonConvergence(format!("every ticker failed; first: {}: {}", f.ticker, f.error)),
            _ => Error::Data(format!("every ticker failed; first: {}: {}", f.ticker, f.error)),
        }),
        _ => Ok(()),
    }
}

fn generator(kind: &str) -> Result<(GeneratorKind, bool)> {
    Ok(match kind {
        "iid" => (GeneratorKind::IidGaussian, false),
        "linear" => (GeneratorKind::var1(0.5, 0.2), false),
        "linear-reverse" => (GeneratorKind::var1(0.5, 0.2), true),
        "quadratic" => (GeneratorKind::quadratic(1.0), false),
        "abs" => (GeneratorKind::abs(1.0), false),
        "logistic" => (GeneratorKind::logistic(), false),
        "garch" => (GeneratorKind::garch(0.1, 0.1, 0.8), false),
        other => return Err(Error::Config(format!("unknown generator kind {other:?}"))),
    })
}

fn synth(args: &SynthArgs) -> Result<()> {
    let mut activity = std::collections::BTreeMap::new();
    let mut prices = std::collections::BTreeMap::new();
    for entry in &args.tickers {
        let (name, kind) = entry
            .split_once('=')
            .filter(|(n, _)| !n.is_empty())
            .ok_or_else(|| Error::Config(format!("--ticker expects NAME=KIND, got {entry:?}")))?;
        let (kind, reverse) = generator(kind)?;
        let mut spec = GeneratorSpec::new(kind, args.n, rng::derive_seed(args.seed, &[rng::label_hash(name)]));
        spec.reverse = reverse;
        let (a, p) = market_series(&spec)?;
        activity.insert(name.to_string(), a);
        prices.insert(name.to_string(), p);
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let sentiment_path = args.out_dir.join("sentiment.csv");
    let prices_path = args.out_dir.join("prices.csv");
    write_sentiment_csv(std::fs::File::create(&sentiment_path)?, &activity)?;
    write_prices_csv(std::fs::File::create(&prices_path)?, &prices)?;
    println!("{}\n{}", sentiment_path.display(), prices_path.display());
    Ok(())
}

fn rerender(args: &ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)?;
    let report = from_json(&text)?;
    let fmts = formats(&args.format, &None);
    let paths = emit_report(&report, &args.out_dir, &fmts)?;
    for p in &paths {
        println!("{}", p.display());
    }
    Ok(())
}
