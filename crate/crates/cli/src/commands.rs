use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use stw_core::baselines::{quadtree_build, save_tree_set, tsw_sample, QuadtreeConfig, TswConfig, DEFAULT_MAX_DEPTH};
use stw_core::data_io::{load_corpus, save_corpus, save_split, synthetic_instruments};
use stw_core::eval::{
    bench_batch, config_hash, default_k_grid, evaluate, evaluate_resampled, write_records, write_timings_csv,
    BenchConfig,
};
use stw_core::measures::validate_corpus;
use stw_core::stw::{harden, save_checkpoint, select_margin, train, Checkpoint, TrainConfig};
use stw_core::tree::save_tree;
use stw_core::LabeledCorpus;

use crate::config::{emit, required, resolve};
use crate::error::CliError;
use crate::providers::{self, load_cloud, MissingWords, ProviderConfig, ProviderFlags, ProviderKind};

fn load_valid_corpus(corpus: &Option<PathBuf>, split: &Option<PathBuf>) -> Result<LabeledCorpus, CliError> {
    let corpus = load_corpus(required(corpus, "corpus")?, split.as_deref())?;
    let report = validate_corpus(&corpus);
    if !report.is_valid() {
        return Err(CliError::Data(format!("corpus failed validation:\n{report}")));
    }
    Ok(corpus)
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    Ok(())
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string(value).expect("serializable output"));
}

// ---- synth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub train: usize,
    pub test: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { train: 100, test: 100, seed: 0, out: None }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SynthFlags {
    /// Training documents.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    train: Option<usize>,
    /// Test documents.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Output directory for corpus.jsonl and split.txt.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

pub fn synth(flags: &SynthFlags, file: Option<&Path>) -> Result<(), CliError> {
    let cfg: SynthConfig = resolve("synth", flags, file)?;
    let out = required(&cfg.out, "out")?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;
    let corpus = synthetic_instruments(cfg.train, cfg.test, cfg.seed);
    save_corpus(out.join("corpus.jsonl"), &corpus)?;
    save_split(out.join("split.txt"), &corpus.split)?;
    emit("synth", &cfg, Some(out))?;
    print_json(
        &json!({ "corpus": out.join("corpus.jsonl"), "split": out.join("split.txt"), "documents": corpus.documents.len() }),
    );
    Ok(())
}

// ---- train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRunConfig {
    pub corpus: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Pick the margin from `margin_grid` by validation kNN error; otherwise
    /// train once with `margin`.
    pub select_margin: bool,
    #[serde(flatten)]
    pub params: TrainConfig,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        TrainRunConfig { corpus: None, split: None, out: None, select_margin: true, params: TrainConfig::default() }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainFlags {
    /// Corpus file (JSON lines).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    corpus: Option<PathBuf>,
    /// Split file; without one every document is training data.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    select_margin: Option<bool>,
    /// Margin used when --select-margin is false.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    margin: Option<f64>,
    /// Comma-separated candidate margins.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    margin_grid: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mass_scale: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    validation_fraction: Option<f64>,
    /// Branching factor of the internal tree.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    branching: Option<usize>,
    /// Depth of the internal tree.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    /// k of the kNN rule that scores margins.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    selection_k: Option<usize>,
}

pub fn train_cmd(flags: &TrainFlags, file: Option<&Path>) -> Result<(), CliError> {
    let cfg: TrainRunConfig = resolve("train", flags, file)?;
    cfg.params.validate()?;
    let out = required(&cfg.out, "out")?;
    let corpus = load_valid_corpus(&cfg.corpus, &cfg.split)?;
    let (params, outcome, candidates) = if cfg.select_margin {
        let chosen = select_margin(&corpus, &cfg.params)?;
        for (m, e) in &chosen.candidates {
            log::info!("margin {m}: validation error {e:.4}");
        }
        (TrainConfig { margin: chosen.margin, ..cfg.params.clone() }, chosen.outcome, chosen.candidates)
    } else {
        (cfg.params.clone(), train(&corpus, &cfg.params)?, vec![])
    };
    let ck = Checkpoint::new(&outcome.model, &params, &corpus.vocabulary.hash(), outcome.best_epoch, outcome.log)?;
    create_parent(out)?;
    save_checkpoint(out, &ck)?;
    emit("train", &cfg, Some(out))?;
    print_json(&json!({
        "checkpoint": out,
        "margin": params.margin,
        "margin_candidates": candidates,
        "best_epoch": outcome.best_epoch,
        "best_valid_loss": outcome.best_valid_loss,
    }));
    Ok(())
}

// ---- harden

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HardenConfig {
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct HardenFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint: Option<PathBuf>,
    /// Tree file to write.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

pub fn harden_cmd(flags: &HardenFlags, file: Option<&Path>) -> Result<(), CliError> {
    let cfg: HardenConfig = resolve("harden", flags, file)?;
    let path = required(&cfg.checkpoint, "checkpoint")?;
    let out = required(&cfg.out, "out")?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let tree = harden(&ck.model()?);
    create_parent(out)?;
    save_tree(out, &tree, &ck.vocab_hash, Some(json!({ "harden": ck.config })))?;
    emit("harden", &cfg, Some(out))?;
    print_json(&json!({ "tree": out, "n_internal": tree.n_internal(), "n_leaf": tree.n_leaf() }));
    Ok(())
}

// ---- eval

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub corpus: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub providers: Vec<ProviderKind>,
    #[serde(flatten)]
    pub inputs: ProviderConfig,
    pub k_grid: Vec<usize>,
    pub seed: u64,
    /// Random train/test splits to average over; 1 keeps the given split.
    pub resamples: usize,
    pub out: Option<PathBuf>,
    pub timings_csv: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            corpus: None,
            split: None,
            providers: vec![],
            inputs: ProviderConfig::default(),
            k_grid: default_k_grid(),
            seed: 0,
            resamples: 1,
            out: None,
            timings_csv: None,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EvalFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    corpus: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<PathBuf>,
    /// Comma-separated distance providers.
    #[arg(long = "provider", value_enum, value_delimiter = ',')]
    #[serde(rename = "providers", skip_serializing_if = "Option::is_none")]
    providers: Option<Vec<ProviderKind>>,
    #[command(flatten)]
    #[serde(flatten)]
    inputs: ProviderFlags,
    /// Comma-separated candidate k.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    k_grid: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Average the test error over this many random train/test splits.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    resamples: Option<usize>,
    /// Report file, one JSON record per provider.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    /// Per-query timings as CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    timings_csv: Option<PathBuf>,
}

fn need_providers(kinds: &[ProviderKind]) -> Result<(), CliError> {
    if kinds.is_empty() {
        let names: Vec<String> = ProviderKind::value_variants_names();
        return Err(CliError::Usage(format!("no --provider given; choose from {}", names.join(", "))));
    }
    Ok(())
}

trait VariantNames {
    fn value_variants_names() -> Vec<String>;
}

impl VariantNames for ProviderKind {
    fn value_variants_names() -> Vec<String> {
        use clap::ValueEnum;
        ProviderKind::value_variants()
            .iter()
            .filter_map(|v| v.to_possible_value())
            .map(|p| p.get_name().to_string())
            .collect()
    }
}

pub fn eval_cmd(flags: &EvalFlags, file: Option<&Path>) -> Result<(), CliError> {
    let cfg: EvalConfig = resolve("eval", flags, file)?;
    need_providers(&cfg.providers)?;
    if cfg.k_grid.is_empty() || cfg.k_grid.contains(&0) {
        return Err(CliError::Usage("k grid must be nonempty and positive".into()));
    }
    let corpus = load_valid_corpus(&cfg.corpus, &cfg.split)?;
    let hash = config_hash(&cfg);
    let n_refs = corpus.split.train.len() + corpus.split.valid.len();
    if cfg.resamples > 1 && cfg.providers.iter().any(|k| matches!(k, ProviderKind::Stw | ProviderKind::SoftStw)) {
        log::warn!("resampled splits reuse a checkpoint trained on the original split");
    }
    let mut reports = Vec::new();
    let mut resampled = Vec::new();
    for &kind in &cfg.providers {
        let provider = providers::build(kind, &cfg.inputs, &corpus)?;
        if cfg.resamples == 1 {
            let report = evaluate(provider.as_ref(), &corpus, &cfg.k_grid, cfg.seed, hash.clone())?;
            print_json(&report);
            reports.push(report);
        } else {
            let r = evaluate_resampled(provider.as_ref(), &corpus, &cfg.k_grid, cfg.resamples, cfg.seed, hash.clone())?;
            print_json(&r);
            reports.extend(r.reports.iter().cloned());
            resampled.push(r);
        }
    }
    if let Some(out) = &cfg.out {
        create_parent(out)?;
        let f = std::fs::File::create(out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
        if resampled.is_empty() {
            write_records(f, &reports)?;
        } else {
            write_records(f, &resampled)?;
        }
    }
    if let Some(csv) = &cfg.timings_csv {
        let rows: Vec<(String, usize, Vec<f64>)> =
            reports.iter().map(|r| (r.provider.clone(), n_refs, r.query_times.clone())).collect();
        write_timings_csv(csv, &rows)?;
    }
    emit("eval", &cfg, cfg.out.as_deref())?;
    Ok(())
}

// ---- bench

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchRunConfig {
    pub corpus: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub providers: Vec<ProviderKind>,
    #[serde(flatten)]
    pub inputs: ProviderConfig,
    pub batch_sizes: Vec<usize>,
    pub queries: usize,
    pub refs: usize,
    pub repeats: usize,
    pub seed: u64,
    pub verify: bool,
    pub out: Option<PathBuf>,
    pub timings_csv: Option<PathBuf>,
}

impl Default for BenchRunConfig {
    fn default() -> Self {
        let b = BenchConfig::default();
        BenchRunConfig {
            corpus: None,
            split: None,
            providers: vec![],
            inputs: ProviderConfig::default(),
            batch_sizes: vec![1, 10, 100, 500],
            queries: b.n_queries,
            refs: b.n_refs,
            repeats: b.repeats,
            seed: b.seed,
            verify: b.verify,
            out: None,
            timings_csv: None,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct BenchFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    corpus: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<PathBuf>,
    /// Comma-separated distance providers.
    #[arg(long = "provider", value_enum, value_delimiter = ',')]
    #[serde(rename = "providers", skip_serializing_if = "Option::is_none")]
    providers: Option<Vec<ProviderKind>>,
    #[command(flatten)]
    #[serde(flatten)]
    inputs: ProviderFlags,
    /// Comma-separated batch sizes to sweep.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_sizes: Option<Vec<usize>>,
    /// Sampled query documents.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    queries: Option<usize>,
    /// References compared against each query.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    refs: Option<usize>,
    /// Timed runs per query; the fastest is kept.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    repeats: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Check batched distances against the one-by-one loop.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    verify: Option<bool>,
    /// Report file, one JSON record per provider and batch size.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    timings_csv: Option<PathBuf>,
}

pub fn bench_cmd(flags: &BenchFlags, file: Option<&Path>) -> Result<(), CliError> {
    let cfg: BenchRunConfig = resolve("bench", flags, file)?;
    need_providers(&cfg.providers)?;
    if cfg.batch_sizes.is_empty() {
        return Err(CliError::Usage("no batch sizes given".into()));
    }
    let corpus = load_valid_corpus(&cfg.corpus, &cfg.split)?;
    let mut reports = Vec::new();
    for &kind in &cfg.providers {
        let provider = providers::build(kind, &cfg.inputs, &corpus)?;
        for &batch_size in &cfg.batch_sizes {
            let bench = BenchConfig {
                n_queries: cfg.queries,
                n_refs: cfg.refs,
                batch_size,
                seed: cfg.seed,
                repeats: cfg.repeats,
                verify: cfg.verify,
            };
            let report = bench_batch(provider.as_ref(), &corpus, &bench)?;
            if report.matches_sequential == Some(false) {
                return Err(CliError::Internal(format!(
                    "{} batch of {batch_size} differs from sequential",
                    report.provider
                )));
            }
            print_json(&report);
            reports.push(report);
        }
    }
    if let Some(out) = &cfg.out {
        create_parent(out)?;
        let f = std::fs::File::create(out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
        write_records(f, &reports)?;
    }
    if let Some(csv) = &cfg.timings_csv {
        let rows: Vec<(String, usize, Vec<f64>)> =
            reports.iter().map(|r| (r.provider.clone(), r.batch_size, r.query_times.clone())).collect();
        write_timings_csv(csv, &rows)?;
    }
    emit("bench", &cfg, cfg.out.as_deref())?;
    Ok(())
}

// ---- build-quadtree

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadtreeRunConfig {
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub missing_words: MissingWords,
    pub embedding_seed: u64,
    pub seed: u64,
    pub max_depth: usize,
    pub merge_duplicates: bool,
    pub out: Option<PathBuf>,
}

impl Default for QuadtreeRunConfig {
    fn default() -> Self {
        QuadtreeRunConfig {
            corpus: None,
            embeddings: None,
            missing_words: MissingWords::Error,
            embedding_seed: 0,
            seed: 0,
            max_depth: DEFAULT_MAX_DEPTH,
            merge_duplicates: true,
            out: None,
        }
    }
}

/// Flags shared by the two tree builders.
#[derive(Debug, Args, Serialize)]
pub struct EmbeddingFlags {
    /// Corpus whose vocabulary the tree covers.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    corpus: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    embeddings: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    missing_words: Option<MissingWords>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    embedding_seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// File to write.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct QuadtreeFlags {
    #[command(flatten)]
    #[serde(flatten)]
    common: EmbeddingFlags,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_depth: Option<usize>,
    /// Words with identical vectors share a node instead of failing.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    merge_duplicates: Option<bool>,
}

fn embedding_policy(missing: MissingWords, seed: u64) -> stw_core::data_io::MissingWordPolicy {
    ProviderConfig { missing_words: missing, embedding_seed: seed, ..ProviderConfig::default() }.missing_policy()
}

pub fn build_quadtree(flags: &QuadtreeFlags, file: Option<&Path>) -> Result<(), CliError> {
    let cfg: QuadtreeRunConfig = resolve("build-quadtree", flags, file)?;
    let out = required(&cfg.out, "out")?;
    let corpus = load_valid_corpus(&cfg.corpus, &None)?;
    let cloud = load_cloud(
        required(&cfg.embeddings, "embeddings")?,
        &corpus,
        embedding_policy(cfg.missing_words, cfg.embedding_seed),
    )?;
    let qcfg = QuadtreeConfig { seed: cfg.seed, max_depth: cfg.max_depth, merge_duplicates: cfg.merge_duplicates };
    let q = quadtree_build(&cloud, &qcfg)?;
    if q.capped_points > 0 {
        log::warn!("{} points were still together at depth {}", q.capped_points, cfg.max_depth);
    }
    create_parent(out)?;
    save_tree(out, &q.tree, &corpus.vocabulary.hash(), Some(json!({ "quadtree": qcfg })))?;
    emit("build-quadtree", &cfg, Some(out))?;
    print_json(
        &json!({ "tree": out, "n_internal": q.tree.n_internal(), "aliases": q.aliases, "capped_points": q.capped_points }),
    );
    Ok(())
}

// ---- build-tsw

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TswRunConfig {
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub missing_words: MissingWords,
    pub embedding_seed: u64,
    #[serde(flatten)]
    pub params: TswConfig,
    pub out: Option<PathBuf>,
}

impl Default for TswRunConfig {
    fn default() -> Self {
        TswRunConfig {
            corpus: None,
            embeddings: None,
            missing_words: MissingWords::Error,
            embedding_seed: 0,
            params: TswConfig::default(),
            out: None,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TswFlags {
    #[command(flatten)]
    #[serde(flatten)]
    common: EmbeddingFlags,
    /// Trees to sample.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_trees: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    branching: Option<usize>,
}

pub fn build_tsw(flags: &TswFlags, file: Option<&Path>) -> Result<(), CliError> {
    let cfg: TswRunConfig = resolve("build-tsw", flags, file)?;
    let out = required(&cfg.out, "out")?;
    let corpus = load_valid_corpus(&cfg.corpus, &None)?;
    let cloud = load_cloud(
        required(&cfg.embeddings, "embeddings")?,
        &corpus,
        embedding_policy(cfg.missing_words, cfg.embedding_seed),
    )?;
    let set = tsw_sample(&cloud, &cfg.params)?;
    create_parent(out)?;
    save_tree_set(out, &set, &corpus.vocabulary.hash(), Some(json!({ "tsw": cfg.params })))?;
    emit("build-tsw", &cfg, Some(out))?;
    print_json(&json!({ "tree_set": out, "trees": set.len() }));
    Ok(())
}

// ---- validate

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidateConfig {
    pub corpus: Option<PathBuf>,
    pub split: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    corpus: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<PathBuf>,
}

pub fn validate_cmd(flags: &ValidateFlags, file: Option<&Path>) -> Result<(), CliError> {
    let cfg: ValidateConfig = resolve("validate", flags, file)?;
    emit("validate", &cfg, None)?;
    let corpus = load_valid_corpus(&cfg.corpus, &cfg.split)?;
    print_json(&json!({
        "valid": true,
        "documents": corpus.documents.len(),
        "vocabulary": corpus.vocabulary.len(),
        "vocab_hash": corpus.vocabulary.hash(),
        "train": corpus.split.train.len(),
        "valid_split": corpus.split.valid.len(),
        "test": corpus.split.test.len(),
    }));
    Ok(())
}
