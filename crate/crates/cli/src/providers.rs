use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use stw_core::baselines::{
    load_tree_set, quadtree_build, tsw_sample, FlowtreeProvider, PointCloud, QuadtreeConfig, TswConfig, TswProvider,
    DEFAULT_MAX_DEPTH,
};
use stw_core::data_io::{load_embeddings, MissingWordPolicy};
use stw_core::eval::{DistanceProvider, SoftProvider, TreeProvider};
use stw_core::stw::{harden, load_checkpoint};
use stw_core::tree::load_tree;
use stw_core::{LabeledCorpus, TreeAdjacency};

use crate::config::required;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    /// Hardened tree from a training checkpoint.
    Stw,
    /// Relaxed tree from a training checkpoint; not a metric.
    SoftStw,
    /// Any saved tree file.
    Tree,
    /// Quadtree from `--tree` or built from `--embeddings`.
    Quadtree,
    /// Quadtree plan priced by Euclidean distances; needs `--embeddings`.
    Flowtree,
    /// Tree set from `--tree-set` or sampled from `--embeddings`.
    Tsw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MissingWords {
    /// Words without a vector are an error.
    #[default]
    Error,
    /// Words without a vector get a seeded random one.
    Random,
}

/// Inputs needed to build any provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub checkpoint: Option<PathBuf>,
    pub tree: Option<PathBuf>,
    pub tree_set: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub missing_words: MissingWords,
    pub embedding_seed: u64,
    pub quadtree_seed: u64,
    pub quadtree_max_depth: usize,
    pub tsw_trees: usize,
    pub tsw_depth: usize,
    pub tsw_branching: usize,
    pub tsw_seed: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        let tsw = TswConfig::default();
        ProviderConfig {
            checkpoint: None,
            tree: None,
            tree_set: None,
            embeddings: None,
            missing_words: MissingWords::Error,
            embedding_seed: 0,
            quadtree_seed: 0,
            quadtree_max_depth: DEFAULT_MAX_DEPTH,
            tsw_trees: tsw.n_trees,
            tsw_depth: tsw.depth,
            tsw_branching: tsw.branching,
            tsw_seed: tsw.seed,
        }
    }
}

/// Command-line form of [`ProviderConfig`]; unset flags are left out.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ProviderFlags {
    /// Training checkpoint (stw, soft-stw).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Saved tree (tree, quadtree, flowtree).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<PathBuf>,
    /// Saved tree set (tsw).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree_set: Option<PathBuf>,
    /// Word embeddings, one `<word> <f1> ... <fD>` line per word.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missing_words: Option<MissingWords>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadtree_seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadtree_max_depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tsw_trees: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tsw_depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tsw_branching: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tsw_seed: Option<u64>,
}

impl ProviderConfig {
    pub fn quadtree(&self) -> QuadtreeConfig {
        QuadtreeConfig { seed: self.quadtree_seed, max_depth: self.quadtree_max_depth, merge_duplicates: true }
    }

    pub fn tsw(&self) -> TswConfig {
        TswConfig { n_trees: self.tsw_trees, depth: self.tsw_depth, branching: self.tsw_branching, seed: self.tsw_seed }
    }

    pub fn missing_policy(&self) -> MissingWordPolicy {
        match self.missing_words {
            MissingWords::Error => MissingWordPolicy::Error,
            MissingWords::Random => MissingWordPolicy::Random { seed: self.embedding_seed },
        }
    }

    /// Embeddings of the corpus vocabulary as points.
    pub fn point_cloud(&self, corpus: &LabeledCorpus) -> Result<PointCloud, CliError> {
        let path = required(&self.embeddings, "embeddings")?;
        load_cloud(path, corpus, self.missing_policy())
    }
}

pub fn load_cloud(path: &Path, corpus: &LabeledCorpus, policy: MissingWordPolicy) -> Result<PointCloud, CliError> {
    let table = load_embeddings(path, &corpus.vocabulary, policy)?;
    if !table.missing.is_empty() {
        log::warn!("{} words had no embedding and got random vectors", table.missing.len());
    }
    Ok(table.point_cloud()?)
}

fn quadtree_tree(
    cfg: &ProviderConfig,
    corpus: &LabeledCorpus,
    cloud: Option<&PointCloud>,
) -> Result<TreeAdjacency, CliError> {
    if let Some(path) = &cfg.tree {
        return Ok(load_tree(path, &corpus.vocabulary.hash())?.0);
    }
    let built;
    let cloud = match cloud {
        Some(c) => c,
        None => {
            built = cfg.point_cloud(corpus)?;
            &built
        }
    };
    Ok(quadtree_build(cloud, &cfg.quadtree())?.tree)
}

pub fn build(
    kind: ProviderKind,
    cfg: &ProviderConfig,
    corpus: &LabeledCorpus,
) -> Result<Box<dyn DistanceProvider>, CliError> {
    let hash = corpus.vocabulary.hash();
    let provider: Box<dyn DistanceProvider> = match kind {
        ProviderKind::Stw | ProviderKind::SoftStw => {
            let ck = load_checkpoint(required(&cfg.checkpoint, "checkpoint")?, &hash)?;
            let model = ck.model()?;
            if kind == ProviderKind::Stw {
                Box::new(TreeProvider::new("stw", harden(&model)))
            } else {
                Box::new(SoftProvider::new(model))
            }
        }
        ProviderKind::Tree => Box::new(TreeProvider::new("tree", load_tree(required(&cfg.tree, "tree")?, &hash)?.0)),
        ProviderKind::Quadtree => Box::new(TreeProvider::new("quadtree", quadtree_tree(cfg, corpus, None)?)),
        ProviderKind::Flowtree => {
            let cloud = cfg.point_cloud(corpus)?;
            let tree = quadtree_tree(cfg, corpus, Some(&cloud))?;
            Box::new(FlowtreeProvider::new(cloud, tree)?)
        }
        ProviderKind::Tsw => {
            let set = match &cfg.tree_set {
                Some(path) => load_tree_set(path, &hash)?,
                None => tsw_sample(&cfg.point_cloud(corpus)?, &cfg.tsw())?,
            };
            Box::new(TswProvider::new(set))
        }
    };
    Ok(provider)
}
