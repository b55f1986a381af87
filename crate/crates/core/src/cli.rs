//! Command-line front end. Every subcommand resolves one [`RunConfig`]
//! (flags over `--config` file over defaults), echoes it into the output
//! directory and writes its artifacts there.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::checkpoint::{Checkpoint, ModelKind};
use crate::corpus::{generate_synthetic, leave_one_out_split, load_corpus, save_corpus, Corpus, GeneratorConfig, Split, UserProfile};
use crate::diagnostics::check_all;
use crate::error::{Error, Result};
use crate::eval::{evaluate_recommender, MetricsReport, TEST_NEGATIVES};
use crate::experiments::{ablate, model_seed, split_seed, DEFAULT_EPOCHS};
use crate::profiler::{cross_validate_profiler, score_profiler, train_kind, ProfilerKind, WircnnConfig};
use crate::recommender::{
    mf_train, pretrain_item2vec, train_recommender, Hyperparams, Item2VecConfig, ItemEmbeddings, MfConfig, MfModel,
    RecommenderModel, Similarity, Variant,
};
use crate::retrieval::DEFAULT_MIN_COVERAGE;
use crate::serving::{load_scorer, recommend, resolve_ingredients};

/// Overrides the default corpus directory (`data`).
pub const DATA_ENV: &str = "DISHREC_DATA";
pub const DEFAULT_DATA_DIR: &str = "data";
pub const MODEL_FILE: &str = "model";
pub const ECHO_FILE: &str = "config.echo.json";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

impl Scale {
    pub fn generator(self) -> GeneratorConfig {
        match self {
            Scale::Desk => GeneratorConfig::desk(),
            Scale::Full => GeneratorConfig::full(),
        }
    }
}

/// Effective configuration of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub seed: Option<u64>,
    pub data: PathBuf,
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// item2vec checkpoint used to initialise the memory recommender.
    pub pretrained: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub runs: usize,
    pub folds: usize,
    pub scale: Scale,
    /// `None` in eval-profiler compares both kinds.
    pub profiler_kind: Option<ProfilerKind>,
    pub generator: GeneratorConfig,
    /// `n_classes = 0` means "one class per tag of the corpus".
    pub profiler: WircnnConfig,
    pub recommender: Hyperparams,
    pub mf: MfConfig,
    pub item2vec: Item2VecConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            seed: None,
            data: PathBuf::from(DEFAULT_DATA_DIR),
            out: None,
            model: None,
            pretrained: None,
            epochs: None,
            runs: 10,
            folds: 10,
            scale: Scale::Desk,
            profiler_kind: None,
            generator: GeneratorConfig::desk(),
            profiler: WircnnConfig::desk(0),
            recommender: Hyperparams::default(),
            mf: MfConfig::default(),
            item2vec: Item2VecConfig::default(),
        }
    }
}

fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

impl RunConfig {
    /// Defaults, then `$DISHREC_DATA`, then the JSON file. Flags are applied
    /// by the caller afterwards.
    pub fn resolve(command: &str, file: Option<&Path>, scale_flag: Option<Scale>) -> Result<Self> {
        let file_value = match file {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let v: Value =
                    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                if !v.is_object() {
                    return Err(Error::Config(format!("{}: expected a JSON object", p.display())));
                }
                v
            }
            None => Value::Object(Default::default()),
        };
        let file_scale = match file_value.get("scale") {
            Some(v) => Some(
                serde_json::from_value::<Scale>(v.clone()).map_err(|e| Error::Config(format!("scale: {e}")))?,
            ),
            None => None,
        };
        let scale = scale_flag.or(file_scale).unwrap_or_default();
        let mut base = RunConfig {
            scale,
            generator: scale.generator(),
            ..RunConfig::default()
        };
        if let Some(dir) = std::env::var_os(DATA_ENV).filter(|d| !d.is_empty()) {
            base.data = PathBuf::from(dir);
        }
        let mut value = serde_json::to_value(&base).expect("config serializes");
        merge(&mut value, &file_value);
        let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.command = command.to_string();
        cfg.scale = scale;
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Usage(format!("{} trains or samples and needs --seed", self.command)))
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Usage(format!("{} needs --out", self.command)))
    }

    pub fn epochs(&self) -> usize {
        self.epochs.unwrap_or(DEFAULT_EPOCHS)
    }

    /// Writes `config.echo.json` into `dir`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(ECHO_FILE);
        let text = serde_json::to_string_pretty(self).expect("config serializes") + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// A checkpoint path given either as the file itself or as the directory
/// holding `model`.
pub fn model_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MODEL_FILE)
    } else {
        path.to_path_buf()
    }
}

/// How a recommender or MF checkpoint was trained: on the train side of
/// split `split_seed(seed, 0)` with model seed `model_seed(seed, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub seed: u64,
    pub epochs: usize,
    pub split_seed: u64,
    pub model_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pretrained: Option<PathBuf>,
}

#[derive(Parser, Debug)]
#[command(name = "dishrec", version, about = "Health-aware recipe recommendation experiments")]
pub struct Cli {
    /// JSON config file; flags override it and it overrides the defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More logging (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus as six JSONL files.
    GenData(GenDataArgs),
    /// Train a health-tag profiler on every user of the corpus.
    TrainProfiler(ProfilerArgs),
    /// Cross-validate profilers, or score a trained one.
    EvalProfiler(EvalProfilerArgs),
    /// Pre-train user and recipe embeddings with item2vec.
    PretrainItem2vec(Item2VecArgs),
    /// Train the memory-network recommender.
    TrainRecommender(RecommenderArgs),
    /// Train the matrix-factorisation baseline.
    TrainMf(MfArgs),
    /// Repeated leave-one-out evaluation of a recommender or MF checkpoint.
    EvalRecommender(EvalRecommenderArgs),
    /// Rank the recipes a user can cook with the given ingredients.
    Recommend(RecommendArgs),
    /// Finite-difference check of every model's gradients.
    GradCheck(GradCheckArgs),
    /// Pre-training × variant ablation of the memory recommender.
    Ablate(AblateArgs),
}

#[derive(Args, Debug, Default)]
pub struct IoArgs {
    /// Corpus directory [default: $DISHREC_DATA, else ./data]
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl IoArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(d) = &self.data {
            cfg.data = d.clone();
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
    }
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub tags: Option<usize>,
    /// Probability that each keyword slot of a tag carries a keyword.
    #[arg(long)]
    pub signal: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct ProfilerFlags {
    #[arg(long, value_parser = parse_profiler_kind)]
    pub kind: Option<ProfilerKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

fn parse_profiler_kind(s: &str) -> std::result::Result<ProfilerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_similarity(s: &str) -> std::result::Result<Similarity, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl ProfilerFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let p = &mut cfg.profiler;
        if self.kind.is_some() {
            cfg.profiler_kind = self.kind;
        }
        if self.epochs.is_some() {
            cfg.epochs = self.epochs;
        }
        if let Some(v) = self.lr {
            p.learning_rate = v;
        }
        if let Some(v) = self.embed_dim {
            p.embed_dim = v;
        }
        if let Some(v) = self.hidden {
            p.hidden = v;
        }
        if let Some(v) = self.max_len {
            p.max_len = v;
        }
        if let Some(v) = self.threshold {
            p.threshold = v;
        }
        if let Some(v) = self.batch_size {
            p.batch_size = v;
        }
    }
}

#[derive(Args, Debug)]
pub struct ProfilerArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub flags: ProfilerFlags,
}

#[derive(Args, Debug)]
pub struct EvalProfilerArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub flags: ProfilerFlags,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Score this checkpoint on the corpus instead of cross-validating.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Item2VecArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct RecommenderFlags {
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Sets both write step sizes.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Sets both refresh rates.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_parser = parse_similarity)]
    pub similarity: Option<Similarity>,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

impl RecommenderFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let h = &mut cfg.recommender;
        if let Some(v) = self.alpha {
            h.alpha = v;
        }
        if let Some(v) = self.beta {
            h.beta_high = v;
            h.beta_low = v;
        }
        if let Some(v) = self.lambda {
            h.lambda_high = v;
            h.lambda_low = v;
        }
        if let Some(v) = self.dim {
            h.dim = v;
        }
        if let Some(v) = self.lr {
            h.learning_rate = v;
        }
        if let Some(v) = self.similarity {
            h.similarity = v;
        }
        if let Some(v) = self.variant {
            h.variant = v;
        }
        if let Some(v) = self.batch_size {
            h.batch_size = v;
        }
        if self.epochs.is_some() {
            cfg.epochs = self.epochs;
        }
    }
}

#[derive(Args, Debug)]
pub struct RecommenderArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub flags: RecommenderFlags,
    /// item2vec checkpoint to initialise from.
    #[arg(long, value_name = "PATH")]
    pub pretrained: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MfArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalRecommenderArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct RecommendArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub user: u32,
    /// Comma-separated ingredient names [default: the user's inventory]
    #[arg(long, value_delimiter = ',')]
    pub ingredients: Option<Vec<String>>,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_COVERAGE)]
    pub min_coverage: f64,
}

#[derive(Args, Debug)]
pub struct GradCheckArgs {
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub flags: RecommenderFlags,
    #[arg(long)]
    pub runs: Option<usize>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::TrainProfiler(_) => "train-profiler",
            Command::EvalProfiler(_) => "eval-profiler",
            Command::PretrainItem2vec(_) => "pretrain-item2vec",
            Command::TrainRecommender(_) => "train-recommender",
            Command::TrainMf(_) => "train-mf",
            Command::EvalRecommender(_) => "eval-recommender",
            Command::Recommend(_) => "recommend",
            Command::GradCheck(_) => "grad-check",
            Command::Ablate(_) => "ablate",
        }
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit status:
/// 0 on success, 2 for usage and config errors, 1 otherwise.
pub fn run_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) | Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

pub fn main_from_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    ExitCode::from(run_args(args))
}

pub fn run(cli: Cli) -> Result<()> {
    let scale = match &cli.command {
        Command::GenData(a) => a.scale,
        _ => None,
    };
    let mut cfg = RunConfig::resolve(cli.command.name(), cli.config.as_deref(), scale)?;
    match cli.command {
        Command::GenData(a) => {
            a.io.apply(&mut cfg);
            if let Some(v) = a.users {
                cfg.generator.n_users = v;
            }
            if let Some(v) = a.tags {
                cfg.generator.n_tags = v;
            }
            if let Some(v) = a.signal {
                cfg.generator.signal_strength = v;
            }
            gen_data(&cfg)
        }
        Command::TrainProfiler(a) => {
            a.io.apply(&mut cfg);
            a.flags.apply(&mut cfg);
            train_profiler_cmd(&mut cfg)
        }
        Command::EvalProfiler(a) => {
            a.io.apply(&mut cfg);
            a.flags.apply(&mut cfg);
            if let Some(v) = a.folds {
                cfg.folds = v;
            }
            if a.model.is_some() {
                cfg.model = a.model;
            }
            eval_profiler_cmd(&mut cfg)
        }
        Command::PretrainItem2vec(a) => {
            a.io.apply(&mut cfg);
            if let Some(v) = a.dim {
                cfg.item2vec.dim = v;
            }
            if let Some(v) = a.epochs {
                cfg.item2vec.epochs = v;
            }
            if let Some(v) = a.negatives {
                cfg.item2vec.negatives = v;
            }
            pretrain_cmd(&cfg)
        }
        Command::TrainRecommender(a) => {
            a.io.apply(&mut cfg);
            a.flags.apply(&mut cfg);
            if a.pretrained.is_some() {
                cfg.pretrained = a.pretrained;
            }
            train_recommender_cmd(&mut cfg)
        }
        Command::TrainMf(a) => {
            a.io.apply(&mut cfg);
            if let Some(v) = a.dim {
                cfg.mf.dim = v;
            }
            if let Some(v) = a.lr {
                cfg.mf.learning_rate = v;
            }
            if a.epochs.is_some() {
                cfg.epochs = a.epochs;
            }
            train_mf_cmd(&mut cfg)
        }
        Command::EvalRecommender(a) => {
            a.io.apply(&mut cfg);
            if a.model.is_some() {
                cfg.model = a.model;
            }
            if let Some(v) = a.runs {
                cfg.runs = v;
            }
            eval_recommender_cmd(&mut cfg)
        }
        Command::Recommend(a) => {
            a.io.apply(&mut cfg);
            if a.model.is_some() {
                cfg.model = a.model.clone();
            }
            recommend_cmd(&cfg, &a)
        }
        Command::GradCheck(a) => {
            a.io.apply(&mut cfg);
            grad_check_cmd(&cfg)
        }
        Command::Ablate(a) => {
            a.io.apply(&mut cfg);
            a.flags.apply(&mut cfg);
            if let Some(v) = a.runs {
                cfg.runs = v;
            }
            ablate_cmd(&mut cfg)
        }
    }
}

fn load_data(cfg: &RunConfig) -> Result<Corpus> {
    info!("loading corpus from {}", cfg.data.display());
    load_corpus(&cfg.data)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializes") + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_loss_trace(dir: &Path, trace: &[f64]) -> Result<()> {
    write_json(&dir.join("loss.json"), &serde_json::json!({ "loss_trace": trace }))
}

fn gen_data(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let out = cfg.out.clone().unwrap_or_else(|| cfg.data.clone());
    let corpus = generate_synthetic(&cfg.generator, seed)?;
    save_corpus(&corpus, &out)?;
    cfg.echo(&out)?;
    println!(
        "wrote {} users, {} recipes, {} tags to {}",
        corpus.users.len(),
        corpus.recipes.len(),
        corpus.tags.len(),
        out.display()
    );
    Ok(())
}

fn fill_profiler_classes(cfg: &mut RunConfig, corpus: &Corpus) -> Result<()> {
    if cfg.profiler.n_classes == 0 {
        cfg.profiler.n_classes = corpus.tags.len();
    }
    if cfg.profiler.n_classes != corpus.tags.len() {
        return Err(Error::Config(format!(
            "profiler has {} classes but the corpus has {} tags",
            cfg.profiler.n_classes,
            corpus.tags.len()
        )));
    }
    cfg.profiler.validate()
}

fn train_profiler_cmd(cfg: &mut RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?.to_path_buf();
    let corpus = load_data(cfg)?;
    fill_profiler_classes(cfg, &corpus)?;
    let kind = *cfg.profiler_kind.get_or_insert(ProfilerKind::Wircnn);
    let epochs = cfg.epochs();
    cfg.echo(&out)?;
    let users: Vec<&UserProfile> = corpus.users.iter().collect();
    let trained = train_kind(kind, &users, &cfg.profiler, epochs, seed)?;
    let record = serde_json::json!({ "seed": seed, "epochs": epochs });
    Checkpoint::from_profiler(&trained)
        .with_training(&record)
        .save(out.join(MODEL_FILE))?;
    write_loss_trace(&out, &trained.loss_trace)?;
    println!(
        "{} profiler: loss {:.4} -> {:.4} over {epochs} epochs",
        kind_name(kind),
        trained.loss_trace.first().copied().unwrap_or(f64::NAN),
        trained.loss_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

/// Aligned `model  metric  mean  std` table over several reports.
pub fn comparison_table(reports: &[(String, MetricsReport)]) -> String {
    let name_w = reports.iter().map(|(n, _)| n.len()).max().unwrap_or(5).max(5);
    let metrics: Vec<&String> = reports
        .first()
        .map(|(_, r)| r.metrics.keys().collect())
        .unwrap_or_default();
    let mut out = format!("{:<name_w$}", "model");
    for m in &metrics {
        let _ = write!(out, "  {:>16}", m);
    }
    out.push('\n');
    for (name, r) in reports {
        let _ = write!(out, "{name:<name_w$}");
        for m in &metrics {
            let cell = r
                .metrics
                .get(*m)
                .map_or("-".to_string(), |v| format!("{:.4} ± {:.4}", v.mean, v.std));
            let _ = write!(out, "  {cell:>16}");
        }
        out.push('\n');
    }
    for (name, r) in reports {
        for note in &r.notes {
            let _ = writeln!(out, "note ({name}): {note}");
        }
    }
    out
}

fn write_comparison(dir: &Path, reports: &[(String, MetricsReport)], notes: &[String]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let map: BTreeMap<&str, &MetricsReport> = reports.iter().map(|(n, r)| (n.as_str(), r)).collect();
    let json = serde_json::json!({ "models": map, "notes": notes });
    write_json(&dir.join("metrics.json"), &json)?;
    let mut table = comparison_table(reports);
    for n in notes {
        let _ = writeln!(table, "note: {n}");
    }
    let path = dir.join("metrics.txt");
    fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
    print!("{table}");
    Ok(())
}

fn eval_profiler_cmd(cfg: &mut RunConfig) -> Result<()> {
    let corpus = load_data(cfg)?;
    if let Some(model) = cfg.model.clone() {
        let out = cfg.out.clone().unwrap_or_else(|| model_dir(&model));
        let profiler = Checkpoint::load(model_file(&model))?.to_profiler()?;
        if profiler.config.n_classes != corpus.tags.len() {
            return Err(Error::Config(format!(
                "profiler has {} classes but the corpus has {} tags",
                profiler.config.n_classes,
                corpus.tags.len()
            )));
        }
        cfg.profiler = profiler.config.clone();
        cfg.profiler_kind = Some(profiler.kind());
        cfg.echo(&out)?;
        let users: Vec<&UserProfile> = corpus.users.iter().collect();
        let report = MetricsReport::from_runs(vec![score_profiler(&profiler, &users)?]);
        report.write(&out)?;
        print!("{}", report.to_table());
        return Ok(());
    }
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?.to_path_buf();
    fill_profiler_classes(cfg, &corpus)?;
    let epochs = cfg.epochs();
    cfg.echo(&out)?;
    let kinds = match cfg.profiler_kind {
        Some(k) => vec![k],
        None => vec![ProfilerKind::Wircnn, ProfilerKind::AvgEmbedding],
    };
    let mut reports = Vec::new();
    for kind in kinds {
        let report = cross_validate_profiler(kind, &corpus.users, &cfg.profiler, epochs, cfg.folds, seed)?;
        reports.push((kind_name(kind).to_string(), report));
    }
    let mut notes = Vec::new();
    if let [(_, w), (_, b)] = reports.as_slice() {
        let wins = w
            .per_run
            .iter()
            .zip(&b.per_run)
            .filter(|(w, b)| w["macro_f1"] > b["macro_f1"])
            .count();
        notes.push(format!("wircnn macro-F1 above avg-embedding in {wins} of {} folds", w.runs));
    }
    write_comparison(&out, &reports, &notes)
}

fn kind_name(kind: ProfilerKind) -> &'static str {
    match kind {
        ProfilerKind::Wircnn => "wircnn",
        ProfilerKind::AvgEmbedding => "avg-embedding",
    }
}

fn model_dir(model: &Path) -> PathBuf {
    if model.is_dir() {
        model.to_path_buf()
    } else {
        model.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

fn pretrain_cmd(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let corpus = load_data(cfg)?;
    cfg.echo(out)?;
    let emb = pretrain_item2vec(&corpus, &cfg.item2vec, seed)?;
    let record = serde_json::json!({ "seed": seed, "epochs": cfg.item2vec.epochs });
    Checkpoint::from_item2vec(&emb, &cfg.item2vec)
        .with_training(&record)
        .save(out.join(MODEL_FILE))?;
    println!(
        "item2vec: {} users and {} recipes embedded in {} dimensions",
        emb.users.rows(),
        emb.recipes.rows(),
        emb.dim()
    );
    Ok(())
}

fn load_pretrained(path: &Path) -> Result<ItemEmbeddings> {
    Ok(Checkpoint::load(model_file(path))?.to_item2vec()?.0)
}

fn first_split(corpus: &Corpus, seed: u64) -> Split {
    leave_one_out_split(&corpus.interactions, TEST_NEGATIVES, split_seed(seed, 0))
}

fn train_recommender_cmd(cfg: &mut RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?.to_path_buf();
    let corpus = load_data(cfg)?;
    cfg.recommender.validate()?;
    let epochs = cfg.epochs();
    cfg.epochs = Some(epochs);
    cfg.echo(&out)?;
    let pretrained = cfg.pretrained.as_deref().map(load_pretrained).transpose()?;
    let split = first_split(&corpus, seed);
    let record = TrainingRecord {
        seed,
        epochs,
        split_seed: split_seed(seed, 0),
        model_seed: model_seed(seed, 0),
        pretrained: cfg.pretrained.clone(),
    };
    let trained = train_recommender(&corpus, &split.train, &cfg.recommender, epochs, record.model_seed, pretrained.as_ref())?;
    Checkpoint::from_recommender(&trained.model)
        .with_training(&record)
        .save(out.join(MODEL_FILE))?;
    write_loss_trace(&out, &trained.loss_trace)?;
    println!(
        "recommender ({}): loss {:.4} -> {:.4} over {epochs} epochs",
        cfg.recommender.variant.name(),
        trained.loss_trace.first().copied().unwrap_or(f64::NAN),
        trained.loss_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn train_mf_cmd(cfg: &mut RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?.to_path_buf();
    let corpus = load_data(cfg)?;
    let epochs = cfg.epochs();
    cfg.epochs = Some(epochs);
    cfg.echo(&out)?;
    let split = first_split(&corpus, seed);
    let record = TrainingRecord {
        seed,
        epochs,
        split_seed: split_seed(seed, 0),
        model_seed: model_seed(seed, 0),
        pretrained: None,
    };
    let trained = mf_train(&corpus, &split.train, &cfg.mf, epochs, record.model_seed)?;
    Checkpoint::from_mf(&trained.model, &cfg.mf)
        .with_training(&record)
        .save(out.join(MODEL_FILE))?;
    write_loss_trace(&out, &trained.loss_trace)?;
    println!(
        "mf: loss {:.4} -> {:.4} over {epochs} epochs",
        trained.loss_trace.first().copied().unwrap_or(f64::NAN),
        trained.loss_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn training_record(ck: &Checkpoint) -> Result<TrainingRecord> {
    serde_json::from_value(ck.training.clone())
        .map_err(|e| Error::Checkpoint(format!("checkpoint lacks a usable training record: {e}")))
}

fn check_model_fits(n_users: usize, n_recipes: usize, corpus: &Corpus) -> Result<()> {
    if n_users != corpus.users.len() || n_recipes != corpus.recipes.len() {
        return Err(Error::Input(format!(
            "model covers {n_users} users and {n_recipes} recipes; corpus has {} and {}",
            corpus.users.len(),
            corpus.recipes.len()
        )));
    }
    Ok(())
}

/// Run 0 reuses the checkpoint when `--seed` matches the seed it was trained
/// with (its split is then exactly run 0's split); every other run retrains
/// with the checkpoint's settings on its own split.
fn eval_recommender_cmd(cfg: &mut RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let model_path = cfg
        .model
        .clone()
        .ok_or_else(|| Error::Usage("eval-recommender needs --model".into()))?;
    let out = cfg.out.clone().unwrap_or_else(|| model_dir(&model_path));
    let corpus = load_data(cfg)?;
    let ck = Checkpoint::load(model_file(&model_path))?;
    let record = training_record(&ck)?;
    let reuse = record.seed == seed;
    cfg.epochs = Some(record.epochs);
    let mut report = match ck.kind {
        ModelKind::Recommender => {
            let model = ck.to_recommender()?;
            check_model_fits(model.n_users(), model.n_recipes(), &corpus)?;
            cfg.recommender = model.hyper.clone();
            cfg.pretrained = record.pretrained.clone();
            cfg.echo(&out)?;
            let pretrained = record.pretrained.as_deref().map(load_pretrained).transpose()?;
            let mut loaded = Some(model);
            evaluate_recommender(&corpus.interactions, cfg.runs, seed, |run, split| -> Result<RecommenderModel> {
                if run == 0 && reuse {
                    return Ok(loaded.take().expect("run 0 happens once"));
                }
                let h = &cfg.recommender;
                Ok(train_recommender(&corpus, &split.train, h, record.epochs, model_seed(seed, run), pretrained.as_ref())?.model)
            })?
        }
        ModelKind::Mf => {
            let (model, config) = ck.to_mf()?;
            check_model_fits(model.users.rows(), model.recipes.rows(), &corpus)?;
            cfg.mf = config;
            cfg.echo(&out)?;
            let mut loaded = Some(model);
            evaluate_recommender(&corpus.interactions, cfg.runs, seed, |run, split| -> Result<MfModel> {
                if run == 0 && reuse {
                    return Ok(loaded.take().expect("run 0 happens once"));
                }
                Ok(mf_train(&corpus, &split.train, &cfg.mf, record.epochs, model_seed(seed, run))?.model)
            })?
        }
        other => {
            return Err(Error::Checkpoint(format!("{other:?} checkpoints cannot rank recipes")));
        }
    };
    if reuse {
        report.notes.push("run 0 scored the checkpoint; later runs retrained with its settings".into());
    } else {
        warn!("--seed {seed} differs from the training seed {}; every run retrains", record.seed);
        report.notes.push(format!(
            "seed differs from the checkpoint's training seed {}; all runs retrained",
            record.seed
        ));
    }
    report.write(&out)?;
    print!("{}", report.to_table());
    Ok(())
}

fn recommend_cmd(cfg: &RunConfig, args: &RecommendArgs) -> Result<()> {
    let model_path = cfg
        .model
        .clone()
        .ok_or_else(|| Error::Usage("recommend needs --model".into()))?;
    let corpus = load_data(cfg)?;
    let user = corpus
        .user(args.user)
        .ok_or_else(|| Error::Input(format!("unknown user {}", args.user)))?;
    let inventory = match &args.ingredients {
        Some(names) => resolve_ingredients(&corpus, names)?,
        None => user.inventory.clone(),
    };
    let scorer = load_scorer(&model_file(&model_path), &corpus)?;
    let top = recommend(&corpus, scorer.as_ref(), args.user, &inventory, args.min_coverage, args.top)?;
    if top.is_empty() {
        println!("no recipe is covered by the given ingredients");
    }
    for r in &top {
        println!("{:>3}  {:>5}  {:<44}  {:>9.4}  {:.2}", r.rank, r.recipe, r.name, r.score, r.coverage);
    }
    if let Some(out) = &cfg.out {
        cfg.echo(out)?;
        write_json(&out.join("recommendations.json"), &top)?;
    }
    Ok(())
}

fn grad_check_cmd(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let reports = check_all(seed)?;
    for r in &reports {
        println!(
            "{:<40} max rel error {:.3e}  {}",
            r.model,
            r.report.max_rel_error(),
            if r.report.passed() { "ok" } else { "FAIL" }
        );
    }
    if let Some(out) = &cfg.out {
        cfg.echo(out)?;
        write_json(&out.join("gradcheck.json"), &reports)?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.report.passed()).map(|r| r.model.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::CheckFailed(format!("gradients disagree with finite differences: {}", failed.join(", "))))
    }
}

fn ablate_cmd(cfg: &mut RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?.to_path_buf();
    let corpus = load_data(cfg)?;
    cfg.recommender.validate()?;
    let epochs = cfg.epochs();
    cfg.epochs = Some(epochs);
    cfg.echo(&out)?;
    let reports = ablate(&corpus, &cfg.recommender, &cfg.item2vec, epochs, cfg.runs, seed)?;
    write_comparison(&out, &reports, &[])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_is_deep_and_file_beats_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"seed": 5, "recommender": {"alpha": 0.25}, "generator": {"n_users": 17}}"#).unwrap();
        let cfg = RunConfig::resolve("ablate", Some(&path), None).unwrap();
        assert_eq!(cfg.seed, Some(5));
        assert_eq!(cfg.recommender.alpha, 0.25);
        assert_eq!(cfg.recommender.beta_high, Hyperparams::default().beta_high);
        assert_eq!(cfg.generator.n_users, 17);
        assert_eq!(cfg.generator.n_tags, GeneratorConfig::desk().n_tags);
        assert_eq!(cfg.command, "ablate");
    }

    #[test]
    fn flags_beat_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"recommender": {"alpha": 0.25, "dim": 8}}"#).unwrap();
        let mut cfg = RunConfig::resolve("train-recommender", Some(&path), None).unwrap();
        RecommenderFlags { alpha: Some(0.75), ..Default::default() }.apply(&mut cfg);
        assert_eq!(cfg.recommender.alpha, 0.75);
        assert_eq!(cfg.recommender.dim, 8);
    }

    #[test]
    fn scale_picks_the_generator_base() {
        let cfg = RunConfig::resolve("gen-data", None, Some(Scale::Full)).unwrap();
        assert_eq!(cfg.generator, GeneratorConfig::full());
    }

    #[test]
    fn unknown_keys_and_bad_files_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"sede": 5}"#).unwrap();
        assert!(matches!(RunConfig::resolve("ablate", Some(&path), None), Err(Error::Config(_))));
        fs::write(&path, "[1, 2]").unwrap();
        assert!(matches!(RunConfig::resolve("ablate", Some(&path), None), Err(Error::Config(_))));
        fs::write(&path, "{").unwrap();
        assert!(matches!(RunConfig::resolve("ablate", Some(&path), None), Err(Error::Config(_))));
    }

    #[test]
    fn missing_seed_is_a_usage_error() {
        let cfg = RunConfig::resolve("train-mf", None, None).unwrap();
        assert!(matches!(cfg.seed(), Err(Error::Usage(_))));
    }
}
