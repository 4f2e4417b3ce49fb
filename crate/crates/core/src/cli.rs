//! File-based command-line pipeline. Every command reads its inputs from
//! files, writes its outputs plus a small run manifest, and maps failures to
//! exit codes: 0 ok, 1 internal error, 2 bad input, 3 incompatible artifact.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundle::UserContext;
use crate::data::{
    catalog_from_events, compute_stats, group_bundle_records, group_bundles, load_bundle_records, load_catalog,
    load_events, make_synthetic_corpus, write_events, CatalogEntry, CorpusKind, DatasetSplit, SplitRule, UserBundles,
};
use crate::data::{read_jsonl, write_jsonl};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, ground_truth, model_auc, recommend, score_lists, EvalOptions, EvalReport, UserRecommendation, CSV_HEADER,
};
use crate::generate::GenerationConfig;
use crate::model::{train, Checkpoint, FrozenModel, ModelConfig, QualityModel, TrainerState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_INCOMPATIBLE: i32 = 3;

/// Everything a run needs, as one JSON document. Flags override fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub generation: GenerationConfig,
    pub split_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
}


impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        require(path)?;
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.into(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// Written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "bundlegen", version, about = "Personalized bundle list generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a planted-pattern event log.
    Synth(SynthArgs),
    /// Turn an event log or a bundle corpus into a train/validation/test split.
    Ingest(IngestArgs),
    /// Print corpus statistics.
    Stats(StatsArgs),
    /// Train the quality model on a split.
    Train(TrainArgs),
    /// Generate bundle lists for users.
    Generate(GenerateArgs),
    /// Score a recommendations file against a split's ground truth.
    Evaluate(EvaluateArgs),
    /// Generate and score over a (λ, C) grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub users: usize,
    #[arg(long, default_value_t = 500)]
    pub items: usize,
    #[arg(long, default_value_t = 40)]
    pub patterns: usize,
    #[arg(long, default_value_t = 0.2)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Events JSONL to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "corpus")]
pub struct CorpusSource {
    /// Purchase events, one JSON object per line.
    #[arg(long, group = "corpus")]
    pub events: Option<PathBuf>,
    /// Pre-defined bundles (needs `--catalog`).
    #[arg(long, group = "corpus", requires = "catalog")]
    pub bundles: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub source: CorpusSource,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Split directory to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, conflicts_with_all = ["bundles", "split"])]
    pub events: Option<PathBuf>,
    #[arg(long, requires = "catalog", conflicts_with = "split")]
    pub bundles: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// A split directory written by `ingest`.
    #[arg(long)]
    pub split: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// RunConfig JSON; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Output directory for `model.json`, `loss_curve.csv` and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Use a free per-item softmax table instead of feature-built rows.
    #[arg(long)]
    pub id_only: bool,
    /// Continue from `<out>/model.json` if it holds trainer state.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct GenerationArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    /// END shift `C`.
    #[arg(long = "shift", short = 'C')]
    pub shift: Option<u32>,
    /// Beam width `M`.
    #[arg(long, short = 'M')]
    pub beam_width: Option<usize>,
    /// List size `K`.
    #[arg(long, short = 'K')]
    pub list_size: Option<usize>,
    /// Largest bundle `T`.
    #[arg(long, short = 'T')]
    pub max_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[command(flatten)]
    pub generation: GenerationArgs,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// JSONL of `{"user": .., "history": [..]}`; defaults to the split's
    /// test users.
    #[arg(long)]
    pub contexts: Option<PathBuf>,
    /// Recommendations JSONL to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Recommendations JSONL from `generate`.
    #[arg(long)]
    pub recs: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    /// Checkpoint to score AUC with.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    pub run_id: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for `report.json` and `report.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[command(flatten)]
    pub generation: GenerationArgs,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Comma-separated λ values.
    #[arg(long, default_value = "0")]
    pub lambdas: String,
    /// Comma-separated C values.
    #[arg(long, default_value = "0")]
    pub shifts: String,
    /// CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

/// One line of a contexts file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub user: u64,
    pub history: Vec<u64>,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn bad_input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_BAD_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Json(_)
            | Error::Csv(_)
            | Error::InvalidConfig(_)
            | Error::EmptyCorpus
            | Error::EmptyContext
            | Error::UnknownItem(_)
            | Error::NoUsers
            | Error::EmptyPool
            | Error::DegenerateInput(_) => EXIT_BAD_INPUT,
            Error::VocabMismatch { .. } => EXIT_INCOMPATIBLE,
            _ => EXIT_INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)))
    }
}

fn needed(value: Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    value.ok_or_else(|| CliError::bad_input(format!("missing {what}: pass it as a flag or in --config")))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {}", e.message);
        return e.code;
    }
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Sizes the worker pool from `BUNDLEGEN_THREADS`.
fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("BUNDLEGEN_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::bad_input(format!("BUNDLEGEN_THREADS must be a positive integer, got {value:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Synth(a) => cmd_synth(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Train(a) => cmd_train(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("run_manifest.json")
    } else {
        let mut name = out.file_name().map(OsString::from).unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

fn write_manifest(command: &str, config: &RunConfig, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Result<()> {
    let m = RunManifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed,
        config_hash: config.hash(),
        config: config.clone(),
        inputs,
        outputs: outputs.clone(),
    };
    let path = manifest_path(&outputs[0]);
    let body = serde_json::to_string_pretty(&m)?;
    fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

fn load_config(common: &ConfigArgs) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_generation(cfg: &mut GenerationConfig, a: &GenerationArgs) -> CliResult<()> {
    if let Some(v) = a.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = a.shift {
        cfg.shift = v;
    }
    if let Some(v) = a.beam_width {
        cfg.beam_width = v;
    }
    if let Some(v) = a.list_size {
        cfg.list_size = v;
    }
    if let Some(v) = a.max_size {
        cfg.max_bundle_size = v;
    }
    cfg.validate()?;
    Ok(())
}

fn load_split(dir: &Path) -> Result<DatasetSplit> {
    require(&dir.join("manifest.json"))?;
    DatasetSplit::load(dir)
}

fn load_model(path: &Path, split: &DatasetSplit) -> Result<FrozenModel> {
    require(path)?;
    let (model, _) = Checkpoint::load(path)?.into_model(&split.vocab)?;
    Ok(model.freeze())
}

fn cmd_synth(a: SynthArgs) -> CliResult<()> {
    let corpus = make_synthetic_corpus(a.seed, a.users, a.items, a.patterns, a.noise)?;
    create_parent(&a.out)?;
    write_events(&a.out, &corpus.events)?;
    let patterns = a.out.with_extension("patterns.json");
    let body = serde_json::to_string_pretty(&corpus.patterns).map_err(Error::from)?;
    fs::write(&patterns, body).map_err(|e| Error::io(&patterns, e))?;
    println!(
        "wrote {} events for {} users, {} planted patterns",
        corpus.events.len(),
        a.users,
        corpus.patterns.len()
    );
    let cfg = RunConfig {
        seed: a.seed,
        ..RunConfig::default()
    };
    write_manifest("synth", &cfg, Vec::new(), vec![a.out, patterns])?;
    Ok(())
}

fn read_corpus(
    events: Option<&Path>,
    bundles: Option<&Path>,
    catalog: Option<&Path>,
) -> Result<(CorpusKind, Vec<UserBundles>, Vec<CatalogEntry>)> {
    match (events, bundles) {
        (Some(ev), _) => {
            require(ev)?;
            let events = load_events(ev)?;
            let catalog = catalog_from_events(&events);
            Ok((CorpusKind::Events, group_bundles(&events), catalog))
        }
        (None, Some(b)) => {
            let c = catalog.ok_or_else(|| Error::InvalidConfig("--bundles needs --catalog".into()))?;
            require(b)?;
            require(c)?;
            let catalog = load_catalog(c)?;
            let records = load_bundle_records(b)?;
            Ok((CorpusKind::Bundles, group_bundle_records(&records, &catalog)?, catalog))
        }
        (None, None) => Err(Error::InvalidConfig("pass --events or --bundles".into())),
    }
}

fn cmd_ingest(a: IngestArgs) -> CliResult<()> {
    let (kind, users, catalog) =
        read_corpus(a.source.events.as_deref(), a.source.bundles.as_deref(), a.catalog.as_deref())?;
    let rule = match kind {
        CorpusKind::Events => SplitRule::co_purchase(),
        CorpusKind::Bundles => SplitRule::predefined(),
    };
    let split = DatasetSplit::build(kind, &users, &catalog, &rule, a.seed)?;
    split.save(&a.out)?;
    println!("{}", split.stats);
    println!(
        "train {} / validation {} / test {} examples, {} users skipped",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split.skipped_users
    );
    let cfg = RunConfig {
        seed: a.seed,
        split_dir: Some(a.out.clone()),
        ..RunConfig::default()
    };
    let inputs = [a.source.events, a.source.bundles, a.catalog].into_iter().flatten().collect();
    write_manifest("ingest", &cfg, inputs, vec![a.out])?;
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> CliResult<()> {
    let stats = match &a.split {
        Some(dir) => load_split(dir)?.stats,
        None => {
            let (_, users, catalog) = read_corpus(a.events.as_deref(), a.bundles.as_deref(), a.catalog.as_deref())?;
            compute_stats(&users, &catalog)?
        }
    };
    println!("{stats}");
    Ok(())
}

fn cmd_train(a: TrainArgs) -> CliResult<()> {
    let mut cfg = load_config(&a.common)?;
    if let Some(s) = a.split {
        cfg.split_dir = Some(s);
    }
    if let Some(o) = a.out {
        cfg.out_dir = Some(o);
    }
    if let Some(e) = a.epochs {
        cfg.model.max_epochs = e;
    }
    if a.id_only {
        cfg.model.feature_aware = false;
    }
    cfg.model.seed = cfg.seed;
    let split_dir = needed(cfg.split_dir.clone(), "split directory")?;
    let out = needed(cfg.out_dir.clone(), "output directory")?;
    let split = load_split(&split_dir)?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let ckpt_path = out.join("model.json");

    let (mut model, mut state) = if a.resume && ckpt_path.exists() {
        let ckpt = Checkpoint::load(&ckpt_path)?;
        let (mut model, state) = ckpt.into_model(&split.vocab)?;
        let state = state.ok_or_else(|| CliError::bad_input("checkpoint has no trainer state to resume from"))?;
        // only the epoch budget may change on resume
        let mut resumed = model.config().clone();
        resumed.max_epochs = cfg.model.max_epochs;
        cfg.model = resumed.clone();
        cfg.seed = resumed.seed;
        let params = model.params().clone();
        model = QualityModel::new(resumed, &split.vocab)?;
        model.set_params(params);
        (model, state)
    } else {
        let model = QualityModel::new(cfg.model.clone(), &split.vocab)?;
        let state = TrainerState::new(&model);
        (model, state)
    };

    let start = Instant::now();
    let report = train(&mut model, &mut state, &split.train, &split.validation)?;
    for e in &report.epochs {
        println!("epoch {:>3}  train {:.4}  valid {:.4}", e.epoch, e.train_loss, e.valid_loss);
    }
    println!(
        "best epoch {} (valid {:.4}){}, {:.1}s",
        report.best_epoch,
        report.best_valid_loss,
        if report.stopped_early { ", stopped early" } else { "" },
        start.elapsed().as_secs_f64()
    );

    Checkpoint::from_model(&model, Some(&state)).save(&ckpt_path)?;
    let curve = out.join("loss_curve.csv");
    let mut w = csv::Writer::from_path(&curve).map_err(Error::from)?;
    w.write_record(["epoch", "train_loss", "valid_loss"]).map_err(Error::from)?;
    for e in &report.epochs {
        w.write_record([e.epoch.to_string(), e.train_loss.to_string(), e.valid_loss.to_string()])
            .map_err(Error::from)?;
    }
    w.flush().map_err(|e| Error::io(&curve, e))?;
    write_manifest("train", &cfg, vec![split_dir], vec![out, ckpt_path, curve])?;
    Ok(())
}

fn contexts_for(split: &DatasetSplit, path: Option<&Path>) -> Result<Vec<UserContext>> {
    let mut contexts = match path {
        Some(p) => {
            require(p)?;
            let rows: Vec<ContextRecord> = read_jsonl(p)?;
            rows.iter()
                .map(|r| split.vocab.encode_context(r.user, &r.history))
                .collect::<Result<Vec<_>>>()?
        }
        None => split.test_contexts()?.into_iter().map(|(c, _)| c).collect(),
    };
    contexts.sort_by_key(|c| c.user_id);
    Ok(contexts)
}

fn cmd_generate(a: GenerateArgs) -> CliResult<()> {
    let mut cfg = load_config(&a.common)?;
    apply_generation(&mut cfg.generation, &a.generation)?;
    if let Some(m) = a.model {
        cfg.checkpoint = Some(m);
    }
    if let Some(s) = a.split {
        cfg.split_dir = Some(s);
    }
    let split_dir = needed(cfg.split_dir.clone(), "split directory")?;
    let ckpt = needed(cfg.checkpoint.clone(), "checkpoint")?;
    let split = load_split(&split_dir)?;
    let model = load_model(&ckpt, &split)?;
    let contexts = contexts_for(&split, a.contexts.as_deref())?;
    if contexts.is_empty() {
        return Err(Error::NoUsers.into());
    }
    let start = Instant::now();
    let (recs, _, short) = recommend(&model, &split.vocab, &contexts, &cfg.generation)?;
    create_parent(&a.out)?;
    write_jsonl(&a.out, &recs)?;
    println!(
        "{} users, {} short lists, {:.1}s",
        recs.len(),
        short,
        start.elapsed().as_secs_f64()
    );
    let mut inputs = vec![ckpt, split_dir];
    inputs.extend(a.contexts);
    write_manifest("generate", &cfg, inputs, vec![a.out])?;
    Ok(())
}

fn write_report(out: &Path, report: &EvalReport) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let json = out.join("report.json");
    fs::write(&json, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&json, e))?;
    let csv_path = out.join("report.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(CSV_HEADER)?;
    w.write_record(report.csv_row())?;
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok((json, csv_path))
}

fn cmd_evaluate(a: EvaluateArgs) -> CliResult<()> {
    require(&a.recs)?;
    let split = load_split(&a.split)?;
    let recs: Vec<UserRecommendation> = read_jsonl(&a.recs)?;
    let gt = ground_truth(&split);
    let unknown = recs.iter().filter(|r| !gt.contains_key(&r.user)).count();
    if unknown > 0 {
        eprintln!("warning: {unknown} recommended users have no ground truth and are ignored");
    }
    let mut recs: Vec<UserRecommendation> = recs.into_iter().filter(|r| gt.contains_key(&r.user)).collect();
    recs.sort_by_key(|r| r.user);
    let missing = gt.len() - recs.len();
    if missing > 0 {
        eprintln!("warning: {missing} ground-truth users have no recommendations");
    }
    let opts = EvalOptions {
        run_id: a.run_id.clone(),
        seed: a.seed,
        ..EvalOptions::default()
    };
    let (precision, diversity, mean_bundle_size) = score_lists(&recs, &gt, &opts.ks)?;
    let auc = match &a.model {
        Some(p) => Some(model_auc(&load_model(p, &split)?, &split, a.seed)?),
        None => None,
    };
    let list_size = recs.iter().map(|r| r.bundles.len()).max().unwrap_or(0);
    let report = EvalReport {
        run_id: a.run_id,
        lambda: recs.first().map_or(0.0, |r| r.lambda),
        shift: recs.first().map_or(0, |r| r.shift),
        beam_width: 0,
        list_size,
        precision,
        diversity,
        auc,
        latency: None,
        mean_bundle_size,
        n_users: recs.len(),
        short_lists: recs.iter().filter(|r| r.bundles.len() < list_size).count(),
    };
    print_report(&report);
    let (json, csv_path) = write_report(&a.out, &report)?;
    let cfg = RunConfig {
        seed: a.seed,
        split_dir: Some(a.split.clone()),
        checkpoint: a.model.clone(),
        out_dir: Some(a.out.clone()),
        ..RunConfig::default()
    };
    let mut inputs = vec![a.recs, a.split];
    inputs.extend(a.model);
    write_manifest("evaluate", &cfg, inputs, vec![a.out, json, csv_path])?;
    Ok(())
}

fn print_report(r: &EvalReport) {
    let mut line = format!("{}  λ={} C={}", r.run_id, r.lambda, r.shift);
    for p in &r.precision {
        line.push_str(&format!("  pre@{} {:.4}", p.k, p.value));
    }
    if let Some(d) = r.diversity {
        line.push_str(&format!("  div {d:.4}"));
    }
    if let Some(a) = r.auc {
        line.push_str(&format!("  auc {a:.4}"));
    }
    line.push_str(&format!("  size {:.2}  users {}", r.mean_bundle_size, r.n_users));
    println!("{line}");
}

fn parse_grid<T: std::str::FromStr>(text: &str, name: &str) -> CliResult<Vec<T>> {
    let values: Vec<T> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::bad_input(format!("bad {name} value {s:?}")))
        })
        .collect::<CliResult<_>>()?;
    if values.is_empty() {
        return Err(CliError::bad_input(format!("{name} grid is empty")));
    }
    Ok(values)
}

fn cmd_sweep(a: SweepArgs) -> CliResult<()> {
    let lambdas: Vec<f64> = parse_grid(&a.lambdas, "lambda")?;
    let shifts: Vec<u32> = parse_grid(&a.shifts, "C")?;
    let mut cfg = load_config(&a.common)?;
    apply_generation(&mut cfg.generation, &a.generation)?;
    if let Some(m) = a.model {
        cfg.checkpoint = Some(m);
    }
    if let Some(s) = a.split {
        cfg.split_dir = Some(s);
    }
    let split_dir = needed(cfg.split_dir.clone(), "split directory")?;
    let ckpt = needed(cfg.checkpoint.clone(), "checkpoint")?;
    let split = load_split(&split_dir)?;
    let model = load_model(&ckpt, &split)?;

    create_parent(&a.out)?;
    let mut w = csv::Writer::from_path(&a.out).map_err(Error::from)?;
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    header.push("mean_bundle_size");
    w.write_record(&header).map_err(Error::from)?;
    for &lambda in &lambdas {
        for &shift in &shifts {
            let gen = GenerationConfig {
                lambda,
                shift,
                ..cfg.generation.clone()
            };
            gen.validate()?;
            let opts = EvalOptions {
                run_id: format!("lambda={lambda},C={shift}"),
                seed: cfg.seed,
                ..EvalOptions::default()
            };
            let (report, _) = evaluate(&model, &split, &gen, &opts)?;
            print_report(&report);
            let mut row = report.csv_row();
            row.push(report.mean_bundle_size.to_string());
            w.write_record(&row).map_err(Error::from)?;
            w.flush().map_err(|e| Error::io(&a.out, e))?;
        }
    }
    std::io::stdout().flush().ok();
    write_manifest("sweep", &cfg, vec![ckpt, split_dir], vec![a.out])?;
    Ok(())
}
