//! Batch-oriented command-line front end.
//!
//! Results are emitted as CSV to stdout or `--out`. Exit codes: 0 on
//! success, 1 on domain errors, 2 on usage errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{Duration, NaiveDate};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::client::{ClientConfig, ClientError, VtClient};
use crate::features::{
    self, FeatureError, FeatureSchema, FeatureVector, SchemaKind, ThresholdPolicy,
};
use crate::forest::{
    self, export_tree, feature_importances, ForestError, ForestModel, ForestStrategy, ParamGrid,
};
use crate::metrics::{self, CertaintyAnchor, MetricsError};
use crate::report::{Label, ParseError};
use crate::service::{self, ReplayScript, ServiceError};
use crate::store::{
    load_manifest_file, AppHistory, DatasetManifest, ManifestError, SnapshotMap, Store,
    StoreError,
};
use crate::strategies::{
    apply_strategy, parse_strategy, LabelingStrategy, StrategyError,
};
use crate::threshold::{find_optimal_threshold, refresh_and_find, ScoreMetric, SearchError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Report(#[from] ParseError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser)]
#[command(
    name = "labelforge",
    version,
    about = "Label apps from time-series antivirus scan reports"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest JSONL scan reports into a store
    Ingest(IngestArgs),
    /// Per-scanner correctness against ground truth over one or more dates
    ScannerCorrectness(ScannerCorrectnessArgs),
    /// Per-scanner certainty over report histories
    ScannerCertainty(ScannerCertaintyArgs),
    /// First zero-delta date per app and whether it held
    Stability(StabilityArgs),
    /// Brute-force the currently optimal count threshold
    FindThreshold(FindThresholdArgs),
    /// Extract feature vectors to CSV
    ExtractFeatures(ExtractFeaturesArgs),
    /// Train a random-forest labeling strategy
    Train(TrainArgs),
    /// Label apps with a strategy or trained model
    Label(LabelArgs),
    /// Score strategies against ground truth over dates
    Evaluate(EvaluateArgs),
    /// Serve the store's report histories over HTTP
    Serve(ServeArgs),
    /// Fetch a report from a report service
    Fetch(FetchArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Store root directory
    #[arg(long)]
    store: PathBuf,
    /// JSONL report files, one JSON object per line
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct ScannerCorrectnessArgs {
    #[arg(long)]
    store: PathBuf,
    /// Ground-truth CSV (app_id,label[,malware_type][,dex_date])
    #[arg(long)]
    manifest: PathBuf,
    /// Evaluation date(s), repeatable
    #[arg(long = "as-of", required = true)]
    as_of: Vec<NaiveDate>,
    /// Restrict to these scanners (default: every scanner seen)
    #[arg(long = "scanner")]
    scanners: Vec<String>,
    /// Restrict the dataset to one malware type
    #[arg(long = "type")]
    malware_type: Option<String>,
    /// Summary mode: only scanners with mean correctness at least this value
    #[arg(long)]
    min_avg: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScannerCertaintyArgs {
    #[arg(long)]
    store: PathBuf,
    /// Optional manifest restricting the app set
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Anchor the window at first_seen or dex_date
    #[arg(long, value_enum, default_value_t = AnchorArg::FirstSeen)]
    anchor: AnchorArg,
    /// Maximum days between the anchor and the earliest snapshot
    #[arg(long, default_value_t = 365)]
    max_gap_days: i64,
    #[arg(long = "scanner")]
    scanners: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnchorArg {
    FirstSeen,
    DexDate,
}

impl From<AnchorArg> for CertaintyAnchor {
    fn from(a: AnchorArg) -> Self {
        match a {
            AnchorArg::FirstSeen => CertaintyAnchor::FirstSeen,
            AnchorArg::DexDate => CertaintyAnchor::DexDate,
        }
    }
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FindThresholdArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Evaluate snapshots as of this date (ignored with --refresh)
    #[arg(long = "as-of")]
    as_of: Option<NaiveDate>,
    /// Rescan and re-download reports through the service first
    #[arg(long)]
    refresh: bool,
    /// Report service base URL (required with --refresh)
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long, default_value = "mcc")]
    metric: ScoreMetricArg,
    /// Inclusive sigma range, e.g. 1..60
    #[arg(long, default_value = "1..60", value_parser = parse_range)]
    range: (u32, u32),
    /// Write the full sigma,score table as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreMetricArg {
    Mcc,
    Accuracy,
}

impl From<ScoreMetricArg> for ScoreMetric {
    fn from(m: ScoreMetricArg) -> Self {
        match m {
            ScoreMetricArg::Mcc => ScoreMetric::Mcc,
            ScoreMetricArg::Accuracy => ScoreMetric::Accuracy,
        }
    }
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("`{s}` is not a range (expected LO..HI)"))?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    let lo: u32 = lo.trim().parse().map_err(|_| format!("bad range start `{lo}`"))?;
    let hi: u32 = hi.trim().parse().map_err(|_| format!("bad range end `{hi}`"))?;
    if lo == 0 || hi < lo {
        return Err(format!("range {lo}..{hi} is empty or starts at zero"));
    }
    Ok((lo, hi))
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureKindArg {
    Engineered,
    Naive,
}

impl From<FeatureKindArg> for SchemaKind {
    fn from(k: FeatureKindArg) -> Self {
        match k {
            FeatureKindArg::Engineered => SchemaKind::Engineered,
            FeatureKindArg::Naive => SchemaKind::Naive,
        }
    }
}

#[derive(Args)]
struct ExtractFeaturesArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long = "as-of")]
    as_of: NaiveDate,
    #[arg(long, value_enum)]
    features: FeatureKindArg,
    /// Schema JSON file (default: built from the reports observed in the store)
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Write the schema that was used (for reproducibility)
    #[arg(long)]
    write_schema: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long = "as-of")]
    as_of: NaiveDate,
    #[arg(long, value_enum)]
    features: FeatureKindArg,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Reduce to the most informative features before the search
    #[arg(long)]
    select: bool,
    /// `default` or a grid JSON file
    #[arg(long, default_value = "default")]
    grid: String,
    /// Search strategy over the grid
    #[arg(long, value_enum, default_value_t = SearchKind::Grid)]
    search: SearchKind,
    /// Points sampled by random search
    #[arg(long, default_value_t = 20)]
    n_samples: usize,
    /// Cross-validation folds
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model output file
    #[arg(long)]
    out: PathBuf,
    /// Also dump each tree of the final forest as text
    #[arg(long)]
    export_trees: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SearchKind {
    Grid,
    Random,
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long = "as-of")]
    as_of: NaiveDate,
    /// Strategy spec: vt>=N, vt>=P%, subset:drebin, subset:FILE[:k=N]
    #[arg(long, conflicts_with = "model")]
    strategy: Option<String>,
    /// Trained model file
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Strategy specs, repeatable
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    /// Trained model files, repeatable
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    /// Evaluation date(s), repeatable
    #[arg(long = "as-of")]
    as_of: Vec<NaiveDate>,
    /// Date-range start (with --to, --step-days)
    #[arg(long)]
    from: Option<NaiveDate>,
    #[arg(long)]
    to: Option<NaiveDate>,
    #[arg(long, default_value_t = 14)]
    step_days: i64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8585")]
    bind: String,
    /// Replay script: JSON map of app_id to the reports successive rescans
    /// should append
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct FetchArgs {
    #[arg(long)]
    base_url: String,
    #[arg(long)]
    app: String,
    /// Poll until the report is newer than this timestamp
    #[arg(long)]
    newer_than: Option<String>,
    /// Ingest the fetched report into this store
    #[arg(long)]
    ingest_store: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    daily_quota: u32,
    #[arg(long, default_value_t = 4)]
    per_minute_quota: u32,
    #[arg(long, default_value_t = 240)]
    poll_interval_secs: u64,
    #[arg(long, default_value_t = 10)]
    max_polls: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest(args) => ingest(args),
        Command::ScannerCorrectness(args) => scanner_correctness(args),
        Command::ScannerCertainty(args) => scanner_certainty(args),
        Command::Stability(args) => stability(args),
        Command::FindThreshold(args) => find_threshold(args),
        Command::ExtractFeatures(args) => extract_features(args),
        Command::Train(args) => train(args),
        Command::Label(args) => label(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Serve(args) => serve(args),
        Command::Fetch(args) => fetch(args),
    }
}

fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(path) => Box::new(fs::File::create(path)?),
        None => Box::new(std::io::stdout()),
    })
}

fn ingest(args: IngestArgs) -> Result<(), CliError> {
    let mut store = Store::open(&args.store)?;
    for file in &args.files {
        let reader = std::io::BufReader::new(fs::File::open(file)?);
        let report = store.ingest(reader)?;
        println!(
            "{}: accepted={} duplicates={} warnings={}",
            file.display(),
            report.accepted,
            report.duplicates,
            report.warnings.len()
        );
        for warning in &report.warnings {
            eprintln!("{}: {warning}", file.display());
        }
    }
    Ok(())
}

/// Union of scanner names over the given snapshot maps, unless an explicit
/// list was requested.
fn scanner_set(explicit: &[String], maps: &[&SnapshotMap]) -> Vec<String> {
    if !explicit.is_empty() {
        return explicit.to_vec();
    }
    let mut set = std::collections::BTreeSet::new();
    for map in maps {
        for snapshot in map.values() {
            set.extend(snapshot.verdicts.keys().cloned());
        }
    }
    set.into_iter().collect()
}

fn scanner_correctness(args: ScannerCorrectnessArgs) -> Result<(), CliError> {
    let store = Store::open(&args.store)?;
    let manifest = load_manifest_file(&args.manifest)?;
    let mut dated: BTreeMap<NaiveDate, SnapshotMap> = BTreeMap::new();
    for date in &args.as_of {
        dated.insert(*date, store.snapshots_at(manifest.app_ids(), *date)?);
    }
    let maps: Vec<&SnapshotMap> = dated.values().collect();
    let scanners = scanner_set(&args.scanners, &maps);

    let mut writer = csv::Writer::from_writer(open_output(&args.out)?);
    if let Some(min_avg) = args.min_avg {
        writer.write_record(["scanner", "mean_correctness"])?;
        for scanner in &scanners {
            let mut sum = 0.0;
            for snapshots in dated.values() {
                sum += metrics::scanner_correctness(
                    snapshots,
                    &manifest,
                    scanner,
                    args.malware_type.as_deref(),
                )?;
            }
            let mean = sum / dated.len() as f64;
            if mean >= min_avg {
                writer.write_record([scanner.as_str(), &format!("{mean:.6}")])?;
            }
        }
    } else {
        writer.write_record(["scanner", "date", "correctness"])?;
        for scanner in &scanners {
            for (date, snapshots) in &dated {
                let rate = metrics::scanner_correctness(
                    snapshots,
                    &manifest,
                    scanner,
                    args.malware_type.as_deref(),
                )?;
                writer.write_record([
                    scanner.as_str(),
                    &date.to_string(),
                    &format!("{rate:.6}"),
                ])?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

fn scanner_certainty(args: ScannerCertaintyArgs) -> Result<(), CliError> {
    let store = Store::open(&args.store)?;
    let app_ids: Vec<String> = match &args.manifest {
        Some(path) => load_manifest_file(path)?.app_ids().map(str::to_owned).collect(),
        None => store.app_ids(),
    };
    let histories: Vec<AppHistory> =
        app_ids.iter().map(|id| store.history(id)).collect::<Result<_, _>>()?;
    let latest: SnapshotMap = histories
        .iter()
        .filter_map(|h| h.snapshots.last().map(|s| (h.app_id.clone(), s.clone())))
        .collect();
    let scanners = scanner_set(&args.scanners, &[&latest]);
    let anchor: CertaintyAnchor = args.anchor.into();
    let max_gap = Duration::days(args.max_gap_days);

    let mut writer = csv::Writer::from_writer(open_output(&args.out)?);
    writer.write_record(["scanner", "anchor", "max_gap_days", "n_apps", "mean", "std"])?;
    let anchor_name = match anchor {
        CertaintyAnchor::FirstSeen => "first_seen",
        CertaintyAnchor::DexDate => "dex_date",
    };
    for scanner in &scanners {
        match metrics::scanner_certainty(&histories, scanner, anchor, max_gap) {
            Ok(stats) => writer.write_record([
                scanner.as_str(),
                anchor_name,
                &args.max_gap_days.to_string(),
                &stats.n_apps.to_string(),
                &format!("{:.6}", stats.mean),
                &format!("{:.6}", stats.std),
            ])?,
            Err(MetricsError::NoQualifyingApps) => writer.write_record([
                scanner.as_str(),
                anchor_name,
                &args.max_gap_days.to_string(),
                "0",
                "",
                "",
            ])?,
            Err(e) => return Err(e.into()),
        }
    }
    writer.flush()?;
    Ok(())
}

fn stability(args: StabilityArgs) -> Result<(), CliError> {
    let store = Store::open(&args.store)?;
    let app_ids: Vec<String> = match &args.manifest {
        Some(path) => load_manifest_file(path)?.app_ids().map(str::to_owned).collect(),
        None => store.app_ids(),
    };
    let mut writer = csv::Writer::from_writer(open_output(&args.out)?);
    writer.write_record(["app_id", "stability_date", "stable_thereafter"])?;
    for app_id in &app_ids {
        let history = store.history(app_id)?;
        let report = metrics::stability_date(&history);
        writer.write_record([
            app_id.as_str(),
            &report.date.map(|d| d.date_naive().to_string()).unwrap_or_default(),
            &report.stable_thereafter.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn find_threshold(args: FindThresholdArgs) -> Result<(), CliError> {
    let manifest = load_manifest_file(&args.manifest)?;
    let metric: ScoreMetric = args.metric.into();
    let range = args.range.0..=args.range.1;

    let result = if args.refresh {
        let base_url =
            args.base_url.clone().ok_or_else(|| usage("--refresh requires --base-url"))?;
        let client = VtClient::new(ClientConfig::new(base_url))?;
        let mut store = Store::open(&args.store)?;
        let (result, refresh) =
            refresh_and_find(&client, &mut store, &manifest, metric, range)?;
        eprintln!(
            "refreshed {} apps, {} failures",
            refresh.refreshed.len(),
            refresh.failures.len()
        );
        for (app, reason) in &refresh.failures {
            eprintln!("skipped {app}: {reason}");
        }
        result
    } else {
        let as_of = args.as_of.ok_or_else(|| usage("provide --as-of or --refresh"))?;
        let store = Store::open(&args.store)?;
        let snapshots = store.snapshots_at(manifest.app_ids(), as_of)?;
        find_optimal_threshold(&snapshots, &manifest, metric, range)?
    };

    println!("best_sigma={} best_score={:.6}", result.best_sigma, result.best_score);
    if args.out.is_some() {
        let mut writer = csv::Writer::from_writer(open_output(&args.out)?);
        writer.write_record(["sigma", "score"])?;
        for (sigma, score) in &result.score_table {
            writer.write_record([sigma.to_string(), format!("{score:.6}")])?;
        }
        writer.flush()?;
    }
    Ok(())
}

/// Builds the feature schema: an explicit file wins; otherwise it is built
/// from every report observed in the store at the evaluation date.
fn resolve_schema(
    schema_file: &Option<PathBuf>,
    kind: SchemaKind,
    snapshots: &SnapshotMap,
) -> Result<FeatureSchema, CliError> {
    match schema_file {
        Some(path) => {
            let schema = FeatureSchema::load(path)?;
            if schema.kind != kind {
                return Err(usage(format!(
                    "schema file is {}, but --features {} was requested",
                    schema.kind, kind
                )));
            }
            Ok(schema)
        }
        None => Ok(FeatureSchema::from_observed(
            kind,
            snapshots.values(),
            features::AsOfPolicy::SnapshotDate,
        )),
    }
}

fn extract_dataset(
    snapshots: &SnapshotMap,
    manifest: &DatasetManifest,
    schema: &FeatureSchema,
) -> Result<(Vec<FeatureVector>, Vec<Label>), CliError> {
    let mut x = Vec::with_capacity(manifest.len());
    let mut y = Vec::with_capacity(manifest.len());
    let mut unknown = (0usize, 0usize);
    for (app_id, gt) in manifest.iter() {
        let snapshot = snapshots
            .get(app_id)
            .ok_or_else(|| MetricsError::MissingSnapshot(app_id.to_owned()))?;
        let (p, t) = features::unknown_vocab_entries(snapshot, schema);
        unknown.0 += p;
        unknown.1 += t;
        x.push(features::extract(snapshot, schema)?);
        y.push(gt.label);
    }
    if unknown != (0, 0) {
        eprintln!(
            "warning: ignored {} permissions and {} tags missing from the schema vocabulary",
            unknown.0, unknown.1
        );
    }
    Ok((x, y))
}

fn extract_features(args: ExtractFeaturesArgs) -> Result<(), CliError> {
    let store = Store::open(&args.store)?;
    let manifest = load_manifest_file(&args.manifest)?;
    let snapshots = store.snapshots_at(manifest.app_ids(), args.as_of)?;
    let schema = resolve_schema(&args.schema, args.features.into(), &snapshots)?;
    if let Some(path) = &args.write_schema {
        schema.save(path)?;
    }
    let (x, y) = extract_dataset(&snapshots, &manifest, &schema)?;

    let mut writer = csv::Writer::from_writer(open_output(&args.out)?);
    let mut header = vec!["app_id".to_owned(), "label".to_owned()];
    header.extend(schema.feature_names());
    writer.write_record(&header)?;
    for ((app_id, _), (vector, label)) in manifest.iter().zip(x.iter().zip(&y)) {
        let mut record = vec![app_id.to_owned(), label.to_string()];
        record.extend(vector.values.iter().map(|v| format!("{v}")));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

fn train(args: TrainArgs) -> Result<(), CliError> {
    let store = Store::open(&args.store)?;
    let manifest = load_manifest_file(&args.manifest)?;
    let snapshots = store.snapshots_at(manifest.app_ids(), args.as_of)?;
    let mut schema = resolve_schema(&args.schema, args.features.into(), &snapshots)?;
    let (mut x, y) = extract_dataset(&snapshots, &manifest, &schema)?;

    let grid = match args.grid.as_str() {
        "default" => ParamGrid::default_grid(),
        path => ParamGrid::load(Path::new(path))?,
    };

    if args.select {
        // Importances come from a forest with default parameters, then the
        // search runs on the reduced schema.
        let probe = forest::train_forest(
            &x,
            &y,
            &schema,
            &forest::HyperParams { n_trees: grid.n_trees, ..Default::default() },
            args.seed,
        )?;
        let importances = feature_importances(&probe);
        let selection =
            features::select_features(&schema, &importances, ThresholdPolicy::MeanImportance)?;
        eprintln!(
            "selected {} of {} features",
            selection.schema.vector_len(),
            schema.vector_len()
        );
        schema = selection.schema;
        x = manifest
            .iter()
            .map(|(app_id, _)| features::extract(&snapshots[app_id], &schema))
            .collect::<Result<_, _>>()?;
    }

    let outcome = match args.search {
        SearchKind::Grid => forest::grid_search(&x, &y, &schema, &grid, args.folds, args.seed)?,
        SearchKind::Random => forest::random_search(
            &x,
            &y,
            &schema,
            &grid,
            args.n_samples,
            args.folds,
            args.seed,
        )?,
    };
    let mut model = outcome.model;
    model.training_meta.dataset = manifest.name.clone();
    model.training_meta.as_of = Some(args.as_of);
    model.save(&args.out)?;

    if let Some(path) = &args.export_trees {
        let mut text = String::new();
        for (i, tree) in model.trees.iter().enumerate() {
            text.push_str(&format!("tree {i}\n"));
            text.push_str(&export_tree(tree, &model.schema));
        }
        fs::write(path, text)?;
    }

    println!(
        "trained criterion={} max_depth={} max_features={} min_samples_split={} bootstrap={} n_trees={} cv_accuracy={:.10} model={}",
        outcome.best_params.criterion,
        outcome
            .best_params
            .max_depth
            .map(|d| d.to_string())
            .unwrap_or_else(|| "none".to_owned()),
        outcome
            .best_params
            .max_features
            .map(|m| m.to_string())
            .unwrap_or_else(|| "all".to_owned()),
        outcome.best_params.min_samples_split,
        outcome.best_params.bootstrap,
        outcome.best_params.n_trees,
        outcome.best_cv_accuracy,
        args.out.display()
    );
    Ok(())
}

fn load_strategies(
    specs: &[String],
    models: &[PathBuf],
) -> Result<Vec<Box<dyn LabelingStrategy>>, CliError> {
    let mut strategies: Vec<Box<dyn LabelingStrategy>> = Vec::new();
    for spec in specs {
        strategies.push(Box::new(parse_strategy(spec)?));
    }
    for path in models {
        strategies.push(Box::new(ForestStrategy::new(ForestModel::load(path)?)));
    }
    if strategies.is_empty() {
        return Err(usage("provide at least one --strategy or --model"));
    }
    Ok(strategies)
}

fn label(args: LabelArgs) -> Result<(), CliError> {
    let store = Store::open(&args.store)?;
    let manifest = load_manifest_file(&args.manifest)?;
    let snapshots = store.snapshots_at(manifest.app_ids(), args.as_of)?;
    let specs: Vec<String> = args.strategy.clone().into_iter().collect();
    let models: Vec<PathBuf> = args.model.clone().into_iter().collect();
    let strategies = load_strategies(&specs, &models)?;
    let strategy = &strategies[0];

    let labels = apply_strategy(strategy.as_ref(), &snapshots);
    let mut writer = csv::Writer::from_writer(open_output(&args.out)?);
    writer.write_record(["app_id", "label"])?;
    for app_id in manifest.app_ids() {
        writer.write_record([app_id, &labels[app_id].to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let store = Store::open(&args.store)?;
    let manifest = load_manifest_file(&args.manifest)?;
    let strategies = load_strategies(&args.strategies, &args.models)?;

    let mut dates = args.as_of.clone();
    if let (Some(from), Some(to)) = (args.from, args.to) {
        if args.step_days < 1 {
            return Err(usage("--step-days must be at least 1"));
        }
        let mut date = from;
        while date <= to {
            dates.push(date);
            date += Duration::days(args.step_days);
        }
    }
    dates.sort_unstable();
    dates.dedup();
    if dates.is_empty() {
        return Err(usage("provide --as-of or --from/--to"));
    }

    let mut writer = csv::Writer::from_writer(open_output(&args.out)?);
    writer.write_record([
        "strategy",
        "as_of",
        "tp",
        "fp",
        "tn",
        "fn",
        "mcc",
        "recall",
        "specificity",
        "accuracy",
    ])?;
    for strategy in &strategies {
        for date in &dates {
            let snapshots = store.snapshots_at(manifest.app_ids(), *date)?;
            let labels = apply_strategy(strategy.as_ref(), &snapshots);
            let cm = metrics::confusion(&labels, &manifest)?;
            writer.write_record([
                strategy.name(),
                date.to_string(),
                cm.true_positives.to_string(),
                cm.false_positives.to_string(),
                cm.true_negatives.to_string(),
                cm.false_negatives.to_string(),
                format!("{:.6}", cm.mcc()),
                format!("{:.6}", cm.recall()),
                format!("{:.6}", cm.specificity()),
                format!("{:.6}", cm.accuracy()),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let store = Store::open(&args.store)?;
    let replay = args.replay.as_ref().map(ReplayScript::load).transpose()?;
    let handle = service::serve(store, &args.bind, replay)?;
    println!("listening on {}", handle.base_url());
    handle.join();
    Ok(())
}

fn fetch(args: FetchArgs) -> Result<(), CliError> {
    let mut config = ClientConfig::new(args.base_url.clone());
    config.daily_quota = args.daily_quota;
    config.per_minute_quota = args.per_minute_quota;
    config.rescan_poll_interval = std::time::Duration::from_secs(args.poll_interval_secs);
    config.max_poll_attempts = args.max_polls;
    let client = VtClient::new(config)?;

    let snapshot = match &args.newer_than {
        Some(ts) => {
            let baseline = crate::report::parse_timestamp(ts)?;
            client.fetch_fresh_report(&args.app, Some(baseline))?
        }
        None => client.fetch_report(&args.app)?,
    };
    if let Some(store_path) = &args.ingest_store {
        let mut store = Store::open(store_path)?;
        store.ingest_snapshot(&snapshot)?;
    }
    match &args.out {
        Some(path) => fs::write(path, snapshot.to_json())?,
        None => println!("{}", snapshot.to_json()),
    }
    Ok(())
}
