use std::collections::VecDeque;
use std::path::Path;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{euclidean, PointCloud};
use crate::error::{Error, Result};
use crate::eval::DistanceProvider;
use crate::measures::Document;
use crate::tree::{batch_distances, tree_wasserstein, TreeAdjacency, TreeFile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TswConfig {
    pub n_trees: usize,
    pub depth: usize,
    pub branching: usize,
    pub seed: u64,
}

impl Default for TswConfig {
    fn default() -> Self {
        TswConfig { n_trees: 3, depth: 6, branching: 5, seed: 0 }
    }
}

/// Independently sampled trees over the same vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTreeSet {
    pub trees: Vec<TreeAdjacency>,
}

impl SampledTreeSet {
    pub fn new(trees: Vec<TreeAdjacency>) -> Result<Self> {
        let first = trees.first().ok_or(Error::EmptySet("tree set"))?;
        if let Some(t) = trees.iter().find(|t| t.n_leaf() != first.n_leaf()) {
            return Err(Error::DimensionMismatch { expected: first.n_leaf(), got: t.n_leaf() });
        }
        Ok(SampledTreeSet { trees })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn n_leaf(&self) -> usize {
        self.trees.first().map_or(0, |t| t.n_leaf())
    }
}

fn centroid(cloud: &PointCloud, members: &[usize]) -> Array1<f64> {
    let mut c = Array1::zeros(cloud.dim());
    for &i in members {
        c += &cloud.point(i);
    }
    c / members.len() as f64
}

/// Farthest-point clustering: a random first center, then repeatedly the
/// member farthest from all chosen centers, stopping early once every member
/// coincides with a center. Members go to their nearest center.
fn farthest_point_clusters(cloud: &PointCloud, members: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let first = members[rng.gen_range(0..members.len())];
    let mut centers = vec![first];
    let mut near: Vec<f64> = members.iter().map(|&i| cloud.distance(i, first)).collect();
    while centers.len() < k {
        let (pos, &far) =
            near.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))).expect("nonempty cluster");
        if far == 0.0 {
            break;
        }
        let c = members[pos];
        centers.push(c);
        for (d, &i) in near.iter_mut().zip(members) {
            *d = d.min(cloud.distance(i, c));
        }
    }
    let mut clusters = vec![Vec::new(); centers.len()];
    for &i in members {
        let best = (0..centers.len())
            .min_by(|&a, &b| cloud.distance(i, centers[a]).total_cmp(&cloud.distance(i, centers[b])).then(a.cmp(&b)))
            .expect("at least one center");
        clusters[best].push(i);
    }
    clusters.retain(|c| !c.is_empty());
    clusters
}

fn sample_tree(cloud: &PointCloud, cfg: &TswConfig, rng: &mut ChaCha8Rng) -> Result<TreeAdjacency> {
    let n_leaf = cloud.len();
    let mut parents: Vec<Option<usize>> = vec![None];
    let mut internal_w = vec![1.0];
    let mut leaf_parent = vec![0; n_leaf];
    let mut leaf_w = vec![0.0; n_leaf];
    let all: Vec<usize> = (0..n_leaf).collect();
    let mut queue = VecDeque::from([(0usize, centroid(cloud, &all), all, 0usize)]);
    while let Some((node, center, members, depth)) = queue.pop_front() {
        let attach = |x: usize, leaf_parent: &mut Vec<usize>, leaf_w: &mut Vec<f64>| {
            leaf_parent[x] = node;
            leaf_w[x] = euclidean(cloud.point(x), center.view());
        };
        if depth >= cfg.depth || members.len() == 1 {
            for &x in &members {
                attach(x, &mut leaf_parent, &mut leaf_w);
            }
            continue;
        }
        for cluster in farthest_point_clusters(cloud, &members, cfg.branching, rng) {
            // A singleton cluster is its word.
            if cluster.len() == 1 {
                attach(cluster[0], &mut leaf_parent, &mut leaf_w);
                continue;
            }
            let c = centroid(cloud, &cluster);
            parents.push(Some(node));
            internal_w.push(euclidean(c.view(), center.view()));
            queue.push_back((parents.len() - 1, c, cluster, depth + 1));
        }
    }
    let mut w = internal_w;
    w.extend(leaf_w);
    TreeAdjacency::from_parents(parents, leaf_parent, Some(w))
}

/// Samples `n_trees` cluster trees. Each node splits its words into
/// `branching` farthest-point clusters down to `depth`; edges run between
/// cluster centroids and from a word to the centroid of its last cluster.
pub fn tsw_sample(cloud: &PointCloud, cfg: &TswConfig) -> Result<SampledTreeSet> {
    if cfg.n_trees == 0 || cfg.depth == 0 || cfg.branching == 0 {
        return Err(Error::InvalidConfig("n_trees, depth and branching must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trees = (0..cfg.n_trees).map(|_| sample_tree(cloud, cfg, &mut rng)).collect::<Result<_>>()?;
    SampledTreeSet::new(trees)
}

/// Mean tree-Wasserstein distance over the set.
pub fn tsw_distance(set: &SampledTreeSet, a: &Document, b: &Document) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet("tree set"));
    }
    let mut total = 0.0;
    for t in &set.trees {
        total += tree_wasserstein(t, a, b)?;
    }
    Ok(total / set.len() as f64)
}

#[derive(Serialize, Deserialize)]
struct TreeSetFile {
    format: String,
    version: u32,
    builder: Option<serde_json::Value>,
    trees: Vec<TreeFile>,
}

const SET_FORMAT: &str = "stw-tree-set";

pub fn save_tree_set(
    path: impl AsRef<Path>,
    set: &SampledTreeSet,
    vocab_hash: &str,
    builder: Option<serde_json::Value>,
) -> Result<()> {
    let file = TreeSetFile {
        format: SET_FORMAT.into(),
        version: 1,
        builder,
        trees: set.trees.iter().map(|t| TreeFile::new(t, vocab_hash, None)).collect(),
    };
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_tree_set(path: impl AsRef<Path>, vocab_hash: &str) -> Result<SampledTreeSet> {
    let file: TreeSetFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if file.format != SET_FORMAT || file.version != 1 {
        return Err(Error::Format(format!("expected {SET_FORMAT} v1, got {} v{}", file.format, file.version)));
    }
    let mut trees = Vec::with_capacity(file.trees.len());
    for t in &file.trees {
        if t.vocab_hash != vocab_hash {
            return Err(Error::VocabularyMismatch { expected: t.vocab_hash.clone(), got: vocab_hash.into() });
        }
        trees.push(t.to_tree()?);
    }
    SampledTreeSet::new(trees)
}

pub struct TswProvider {
    set: SampledTreeSet,
}

impl TswProvider {
    pub fn new(set: SampledTreeSet) -> Self {
        TswProvider { set }
    }
}

impl DistanceProvider for TswProvider {
    fn id(&self) -> &str {
        "tsw"
    }

    fn distance(&self, a: &Document, b: &Document) -> Result<f64> {
        tsw_distance(&self.set, a, b)
    }

    fn batch(&self, query: &Document, refs: &[Document]) -> Result<Vec<f64>> {
        let mut totals = vec![0.0; refs.len()];
        for t in &self.set.trees {
            for (acc, d) in totals.iter_mut().zip(batch_distances(t, query, refs)?) {
                *acc += d;
            }
        }
        let n = self.set.len() as f64;
        Ok(totals.into_iter().map(|t| t / n).collect())
    }
}
