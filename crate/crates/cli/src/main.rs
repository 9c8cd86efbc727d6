use std::fmt::Write as _;
use std::io::Write as _;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use toonbench_core::bench::{
    parse_run_spec, render_report, run_benchmark, select_checkpoint, BenchOptions, ModelRun, RenderOptions,
    ReportFormat,
};
use toonbench_core::concordance::{compute_concordance, rank_metrics, read_rankings, ConcordanceReport, ScoreTable, TiePolicy};
use toonbench_core::dataset::{
    assign_splits, curate, read_scores, validate_manifest, CurationPolicy, DatasetManifest, Split,
};
use toonbench_core::metrics::EvalConfig;
use toonbench_core::{MetricId, PixelAccuracyConfig};
use toonbench_review::{ReviewSession, SessionConfig};

#[derive(Debug, Parser)]
#[command(name = "toonbench", version, about = "Evaluate foreground masks against ground-truth alpha mattes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score prediction directories and render a report.
    Eval(EvalArgs),
    /// Pick the best checkpoint on the validation split.
    Select(SelectArgs),
    /// Assign stratified train/validation/test splits.
    Split(SplitArgs),
    /// Select a hard-example-first subset from baseline scores.
    Curate(CurateArgs),
    /// List problems with a manifest's files.
    Validate(ValidateArgs),
    /// Agreement of each metric with human rankings.
    Concord(ConcordArgs),
    /// Run the blinded ranking service.
    Serve(ServeArgs),
}

fn run_spec(s: &str) -> Result<ModelRun, String> {
    parse_run_spec(s).ok_or_else(|| format!("expected NAME=DIR, got `{s}`"))
}

#[derive(Debug, Args)]
struct EvalFlags {
    /// Dataset manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Model predictions as NAME=DIR; repeatable.
    #[arg(long = "pred", value_name = "NAME=DIR", required = true, value_parser = run_spec)]
    preds: Vec<ModelRun>,
    /// Tolerance on |pred - gt| for Pixel Accuracy.
    #[arg(long, default_value_t = 10)]
    pa_delta: u8,
    /// Erosions applied to the Pixel Accuracy error mask.
    #[arg(long, default_value_t = 1)]
    pa_erosion: usize,
    /// Boundary band width as a fraction of the image diagonal.
    #[arg(long, default_value_t = 0.02)]
    biou_ratio: f64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl EvalFlags {
    fn options(&self, split: Split, allow_missing: bool) -> Result<BenchOptions, CliError> {
        if !(self.biou_ratio.is_finite() && self.biou_ratio > 0.0) {
            return Err(CliError::Usage(format!("--biou-ratio must be positive, got {}", self.biou_ratio)));
        }
        Ok(BenchOptions {
            split,
            eval: EvalConfig {
                pixel_accuracy: PixelAccuracyConfig {
                    delta: self.pa_delta,
                    erosion_iterations: self.pa_erosion,
                    ..Default::default()
                },
                biou_dilation_ratio: self.biou_ratio,
            },
            allow_missing,
            jobs: self.jobs,
        })
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    flags: EvalFlags,
    #[arg(long, default_value = "test")]
    split: Split,
    /// markdown, csv or json.
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exclude records without a prediction instead of failing.
    #[arg(long)]
    allow_missing: bool,
    /// Multiplier applied to MAE and MSE in markdown tables.
    #[arg(long, default_value_t = 1.0)]
    error_scale: f64,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    flags: EvalFlags,
    /// Metric id, e.g. PA, BIoU, MAE.
    #[arg(long)]
    criterion: MetricId,
    /// Comparison report format.
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    #[arg(long)]
    allow_missing: bool,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Clear existing assignments instead of refusing.
    #[arg(long)]
    reassign: bool,
    /// Output manifest; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurateArgs {
    /// CSV with header id,image,mask,category,score.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    target: usize,
    /// Baseline scores at or above this count as easy.
    #[arg(long, default_value_t = 0.99)]
    easy_threshold: f64,
    /// Cap on easy examples as a fraction of the target.
    #[arg(long, default_value_t = 0.20)]
    easy_fraction: f64,
    /// Output manifest; stdout when omitted. Paths resolve against its directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ListFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Markdown,
    Json,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = ListFormat::Text)]
    format: ListFormat,
}

#[derive(Debug, Args)]
struct ConcordArgs {
    /// JSON-lines rankings file.
    #[arg(long)]
    rankings: PathBuf,
    #[command(flatten)]
    flags: EvalFlags,
    /// Split the ranked images come from.
    #[arg(long, default_value = "test")]
    split: Split,
    /// half-credit or disagree.
    #[arg(long, default_value = "half-credit")]
    ties: TiePolicy,
    #[arg(long, value_enum, default_value_t = TableFormat::Markdown)]
    format: TableFormat,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long = "pred", value_name = "NAME=DIR", required = true, value_parser = run_spec)]
    preds: Vec<ModelRun>,
    /// JSON-lines file rankings are appended to.
    #[arg(long)]
    rankings: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, default_value = "test")]
    split: Split,
    /// Directory with the built UI bundle, served at `/`.
    #[arg(long)]
    ui: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

fn load_manifest(path: &Path) -> Result<DatasetManifest, CliError> {
    DatasetManifest::load(path).map_err(CliError::data)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(CliError::data),
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn eval(args: EvalArgs) -> Result<(), CliError> {
    let options = args.flags.options(args.split, args.allow_missing)?;
    let manifest = load_manifest(&args.flags.manifest)?;
    let output = run_benchmark(&manifest, &args.flags.preds, &options).map_err(CliError::data)?;
    warn_all(&output.warnings);
    let render = RenderOptions {
        error_scale: args.error_scale,
    };
    let text = render_report(&output.reports, args.format, &render).map_err(CliError::data)?;
    emit(args.out.as_deref(), &text)
}

fn select(args: SelectArgs) -> Result<(), CliError> {
    let options = args.flags.options(Split::Validation, args.allow_missing)?;
    let manifest = load_manifest(&args.flags.manifest)?;
    let selection =
        select_checkpoint(&args.flags.preds, &manifest, args.criterion, &options).map_err(CliError::data)?;
    let table = render_report(&selection.comparison, args.format, &RenderOptions::default()).map_err(CliError::data)?;
    eprint!("{table}");
    println!("{}", selection.best);
    Ok(())
}

fn split(args: SplitArgs) -> Result<(), CliError> {
    let mut manifest = load_manifest(&args.manifest)?;
    if args.reassign {
        for r in &mut manifest.records {
            r.split = None;
        }
    }
    let assigned = assign_splits(&manifest, args.seed).map_err(CliError::data)?;
    for (category, (train, val, test)) in assigned.split_counts() {
        eprintln!("{category}: train {train}, validation {val}, test {test}");
    }
    match &args.out {
        Some(path) => assigned.save(path).map_err(CliError::data),
        None => emit(None, &assigned.to_json()),
    }
}

fn curate_cmd(args: CurateArgs) -> Result<(), CliError> {
    let scored = read_scores(&args.scores).map_err(CliError::data)?;
    let policy = CurationPolicy {
        easy_score_threshold: args.easy_threshold,
        easy_fraction: args.easy_fraction,
        target_size: args.target,
    };
    let result = curate(&scored, &policy).map_err(CliError::data)?;
    eprintln!(
        "selected {} of {} ({} hard, {} easy)",
        result.selected.len(),
        scored.len(),
        result.hard_count,
        result.easy_count
    );
    if result.short {
        eprintln!("warning: easy cap left the selection short of {}", args.target);
    }
    let base = args
        .out
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let manifest = DatasetManifest::new(result.selected, base).map_err(CliError::data)?;
    match &args.out {
        Some(path) => manifest.save(path).map_err(CliError::data),
        None => emit(None, &manifest.to_json()),
    }
}

fn validate(args: ValidateArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&args.manifest)?;
    let issues = validate_manifest(&manifest);
    let text = match args.format {
        ListFormat::Text => issues.iter().fold(String::new(), |mut s, i| {
            let _ = writeln!(s, "{i}");
            s
        }),
        ListFormat::Json => serde_json::to_string_pretty(&issues).map_err(CliError::data)? + "\n",
    };
    emit(None, &text)?;
    if issues.is_empty() {
        eprintln!("{} records, no issues", manifest.records.len());
        Ok(())
    } else {
        Err(CliError::Data(format!("{} issue(s) in {} records", issues.len(), manifest.records.len())))
    }
}

fn concordance_markdown(report: &ConcordanceReport) -> String {
    let mut s = String::from("| Rank | Metric | Agreement | Credited | Ties |\n| ---: | --- | ---: | ---: | ---: |\n");
    for (k, metric) in rank_metrics(report).into_iter().enumerate() {
        let a = report.per_metric.iter().find(|a| a.metric == metric).expect("ranked metric");
        let _ = writeln!(
            s,
            "| {} | {} | {:.1}% | {} | {} |",
            k + 1,
            metric.title(),
            100.0 * a.rate,
            a.agreements,
            a.ties
        );
    }
    let _ = writeln!(
        s,
        "\n{} comparable pair(s), {} dropped, ties: {:?}",
        report.comparable_pairs, report.dropped_pairs, report.tie_policy
    );
    s
}

fn concord(args: ConcordArgs) -> Result<(), CliError> {
    let options = args.flags.options(args.split, true)?;
    let rankings = read_rankings(&args.rankings).map_err(CliError::data)?;
    let models: Vec<String> = args.flags.preds.iter().map(|r| r.model_name.clone()).collect();
    for r in &rankings {
        r.validate_models(&models).map_err(CliError::data)?;
    }
    let manifest = load_manifest(&args.flags.manifest)?;
    let output = run_benchmark(&manifest, &args.flags.preds, &options).map_err(CliError::data)?;
    warn_all(&output.warnings);
    let table = ScoreTable::from_reports(&output.reports, &MetricId::ALL);
    let report = compute_concordance(&rankings, &table, args.ties).map_err(CliError::data)?;
    let text = match args.format {
        TableFormat::Markdown => concordance_markdown(&report),
        TableFormat::Json => serde_json::to_string_pretty(&report).map_err(CliError::data)? + "\n",
    };
    emit(None, &text)
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&args.manifest)?;
    let session = ReviewSession::open(SessionConfig {
        manifest,
        models: args.preds,
        seed: args.seed,
        rankings_path: args.rankings,
        split: args.split,
    })
    .map_err(CliError::data)?;
    let addr = SocketAddr::new(args.host, args.port);
    eprintln!("serving {} images on http://{addr}", session.image_count());
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::data)?;
    runtime
        .block_on(toonbench_review::serve(Arc::new(session), args.ui, addr))
        .map_err(CliError::data)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(a) => eval(a),
        Command::Select(a) => select(a),
        Command::Split(a) => split(a),
        Command::Curate(a) => curate_cmd(a),
        Command::Validate(a) => validate(a),
        Command::Concord(a) => concord(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
