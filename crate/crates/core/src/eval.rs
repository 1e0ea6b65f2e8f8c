//! kNN classification, `k` selection and batch-timing harness over any
//! document distance.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::measures::{Document, LabeledCorpus, SplitPart};
use crate::stw::{soft_tree_wasserstein, SoftTreeModel};
use crate::tree::{batch_distances, tree_wasserstein, TreeAdjacency};

/// A distance between documents, optionally with a batched one-to-many form.
pub trait DistanceProvider: Sync {
    fn id(&self) -> &str;

    fn distance(&self, a: &Document, b: &Document) -> Result<f64>;

    /// Distances from `query` to each reference. Must equal calling
    /// [`distance`](Self::distance) per reference, bit for bit.
    fn batch(&self, query: &Document, refs: &[Document]) -> Result<Vec<f64>> {
        refs.iter().map(|r| self.distance(query, r)).collect()
    }

    /// Whether the provider is a true metric (symmetric, triangle inequality).
    fn is_metric(&self) -> bool {
        true
    }
}

/// Exact tree-Wasserstein distance on a fixed tree (hardened STW, Quadtree).
pub struct TreeProvider {
    id: String,
    tree: TreeAdjacency,
}

impl TreeProvider {
    pub fn new(id: impl Into<String>, tree: TreeAdjacency) -> Self {
        TreeProvider { id: id.into(), tree }
    }

    pub fn tree(&self) -> &TreeAdjacency {
        &self.tree
    }
}

impl DistanceProvider for TreeProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn distance(&self, a: &Document, b: &Document) -> Result<f64> {
        tree_wasserstein(&self.tree, a, b)
    }

    fn batch(&self, query: &Document, refs: &[Document]) -> Result<Vec<f64>> {
        batch_distances(&self.tree, query, refs)
    }
}

/// Soft tree-Wasserstein distance of an unhardened model. Not a metric.
pub struct SoftProvider {
    model: SoftTreeModel,
}

impl SoftProvider {
    pub fn new(model: SoftTreeModel) -> Self {
        SoftProvider { model }
    }
}

impl DistanceProvider for SoftProvider {
    fn id(&self) -> &str {
        "soft-stw"
    }

    fn distance(&self, a: &Document, b: &Document) -> Result<f64> {
        soft_tree_wasserstein(&self.model, a, b)
    }

    fn is_metric(&self) -> bool {
        false
    }
}

/// Neighbors of one query: `(distance, document index)` sorted ascending,
/// ties broken by lower document index.
fn neighbors(
    provider: &dyn DistanceProvider,
    query: &Document,
    refs: &[Document],
    ref_idx: &[usize],
) -> Result<Vec<(f64, usize)>> {
    let d = provider.batch(query, refs)?;
    let mut out: Vec<(f64, usize)> = d.into_iter().zip(ref_idx.iter().copied()).collect();
    out.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    Ok(out)
}

/// Majority label among the first `k` neighbors. On a tied vote the label
/// reached first in neighbor order wins, which is the nearest neighbor's
/// label whenever it is among the tied ones.
fn vote(sorted: &[(f64, usize)], labels: &[i64], k: usize) -> i64 {
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for &(_, i) in &sorted[..k] {
        *counts.entry(labels[i]).or_insert(0) += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    sorted[..k].iter().map(|&(_, i)| labels[i]).find(|l| counts[l] == top).expect("k >= 1")
}

struct NeighborTable {
    /// Per query: sorted neighbors and elapsed seconds.
    rows: Vec<(Vec<(f64, usize)>, f64)>,
    query_labels: Vec<Option<i64>>,
    labels: Vec<i64>,
}

fn neighbor_table(
    provider: &dyn DistanceProvider,
    corpus: &LabeledCorpus,
    refs: SplitPart,
    queries: SplitPart,
) -> Result<NeighborTable> {
    let ref_idx = corpus.split.get(refs);
    let query_idx = corpus.split.get(queries);
    if ref_idx.is_empty() {
        return Err(Error::EmptySplit(refs.name()));
    }
    if query_idx.is_empty() {
        return Err(Error::EmptySplit(queries.name()));
    }
    let mut labels = vec![0; corpus.documents.len()];
    for &i in ref_idx {
        labels[i] = corpus.documents[i]
            .label()
            .ok_or_else(|| Error::InvalidDocument(format!("reference document {i} is unlabeled")))?;
    }
    let ref_docs: Vec<Document> = ref_idx.iter().map(|&i| corpus.documents[i].clone()).collect();
    let rows = query_idx
        .par_iter()
        .map(|&q| {
            let sw = Stopwatch::start();
            let n = neighbors(provider, &corpus.documents[q], &ref_docs, ref_idx)?;
            Ok((n, sw.elapsed_secs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let query_labels = query_idx.iter().map(|&q| corpus.documents[q].label()).collect();
    Ok(NeighborTable { rows, query_labels, labels })
}

fn check_k(k: usize, n_refs: usize) -> Result<()> {
    if k == 0 || k > n_refs {
        return Err(Error::InvalidConfig(format!("k = {k} must lie in 1..={n_refs}")));
    }
    Ok(())
}

impl NeighborTable {
    fn predictions(&self, k: usize) -> Vec<i64> {
        self.rows.iter().map(|(n, _)| vote(n, &self.labels, k)).collect()
    }

    fn error(&self, k: usize) -> f64 {
        let preds = self.predictions(k);
        let scored: Vec<(i64, i64)> =
            preds.iter().zip(&self.query_labels).filter_map(|(&p, l)| l.map(|l| (p, l))).collect();
        if scored.is_empty() {
            return 0.0;
        }
        scored.iter().filter(|(p, l)| p != l).count() as f64 / scored.len() as f64
    }
}

/// Predicts labels of `queries` documents by majority vote over the `k`
/// nearest `refs` documents.
pub fn knn_predict(
    provider: &dyn DistanceProvider,
    corpus: &LabeledCorpus,
    refs: SplitPart,
    queries: SplitPart,
    k: usize,
) -> Result<Vec<i64>> {
    check_k(k, corpus.split.get(refs).len())?;
    Ok(neighbor_table(provider, corpus, refs, queries)?.predictions(k))
}

/// kNN labels for the test split using the training split as references.
pub fn knn_classify(provider: &dyn DistanceProvider, corpus: &LabeledCorpus, k: usize) -> Result<Vec<i64>> {
    knn_predict(provider, corpus, SplitPart::Train, SplitPart::Test, k)
}

/// Fraction of labeled `queries` documents misclassified.
pub fn knn_error(
    provider: &dyn DistanceProvider,
    corpus: &LabeledCorpus,
    refs: SplitPart,
    queries: SplitPart,
    k: usize,
) -> Result<f64> {
    check_k(k, corpus.split.get(refs).len())?;
    Ok(neighbor_table(provider, corpus, refs, queries)?.error(k))
}

/// Default `k` candidates: odd values 1 through 19.
pub fn default_k_grid() -> Vec<usize> {
    (1..=19).step_by(2).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    /// `(k, validation error)` in grid order.
    pub errors: Vec<(usize, f64)>,
}

/// Picks the `k` with the lowest validation error (smaller `k` on ties),
/// using the training split as references.
pub fn select_k(provider: &dyn DistanceProvider, corpus: &LabeledCorpus, k_grid: &[usize]) -> Result<KSelection> {
    if k_grid.is_empty() {
        return Err(Error::InvalidConfig("k grid is empty".into()));
    }
    let n_refs = corpus.split.train.len();
    for &k in k_grid {
        check_k(k, n_refs.max(1))?;
    }
    let table = neighbor_table(provider, corpus, SplitPart::Train, SplitPart::Valid)?;
    let errors: Vec<(usize, f64)> = k_grid.iter().map(|&k| (k, table.error(k))).collect();
    let (k, _) = errors.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))).expect("nonempty grid");
    Ok(KSelection { k, errors })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub mean: f64,
    pub p50: f64,
    pub p99: f64,
}

impl TimingSummary {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return TimingSummary { mean: 0.0, p50: 0.0, p99: 0.0 };
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let pick = |q: f64| s[((q * (s.len() - 1) as f64).round() as usize).min(s.len() - 1)];
        TimingSummary { mean: s.iter().sum::<f64>() / s.len() as f64, p50: pick(0.5), p99: pick(0.99) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provider: String,
    pub error_rate: f64,
    pub chosen_k: usize,
    pub k_errors: Vec<(usize, f64)>,
    /// Seconds per test query.
    pub query_time: TimingSummary,
    pub n_queries: usize,
    pub config_hash: String,
    #[serde(skip)]
    pub query_times: Vec<f64>,
}

/// Hex digest of any serializable configuration.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("serializable config");
    Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Full protocol: choose `k` on the validation split (carved from training
/// with `seed` when absent, or skipped for a one-element grid), then report
/// the test error with the whole training split as references.
pub fn evaluate(
    provider: &dyn DistanceProvider,
    corpus: &LabeledCorpus,
    k_grid: &[usize],
    seed: u64,
    config_hash: String,
) -> Result<EvalReport> {
    let selection = if k_grid.len() == 1 {
        KSelection { k: k_grid[0], errors: vec![] }
    } else if corpus.split.valid.is_empty() {
        select_k(provider, &corpus.carve_validation(0.2, seed)?, k_grid)?
    } else {
        select_k(provider, corpus, k_grid)?
    };
    let mut refs = corpus.clone();
    refs.split.train.extend(corpus.split.valid.iter().copied());
    refs.split.train.sort_unstable();
    check_k(selection.k, refs.split.train.len())?;
    let table = neighbor_table(provider, &refs, SplitPart::Train, SplitPart::Test)?;
    let query_times: Vec<f64> = table.rows.iter().map(|(_, t)| *t).collect();
    Ok(EvalReport {
        provider: provider.id().to_string(),
        error_rate: table.error(selection.k),
        chosen_k: selection.k,
        k_errors: selection.errors,
        query_time: TimingSummary::from_samples(&query_times),
        n_queries: query_times.len(),
        config_hash,
        query_times,
    })
}

/// Test error averaged over repeated random train/test splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampledReport {
    pub provider: String,
    pub mean_error: f64,
    /// Sample standard deviation; 0 for a single split.
    pub std_error: f64,
    pub reports: Vec<EvalReport>,
}

/// Runs [`evaluate`] on `resamples` splits. One resample is the corpus's own
/// split; more draw split `r` with seed `seed + r`, keeping the test size.
/// The provider is fixed, so a provider trained on the original split sees
/// some of the new test documents.
pub fn evaluate_resampled(
    provider: &dyn DistanceProvider,
    corpus: &LabeledCorpus,
    k_grid: &[usize],
    resamples: usize,
    seed: u64,
    config_hash: String,
) -> Result<ResampledReport> {
    if resamples == 0 {
        return Err(Error::InvalidConfig("resamples must be at least 1".into()));
    }
    let reports = if resamples == 1 {
        vec![evaluate(provider, corpus, k_grid, seed, config_hash)?]
    } else {
        (0..resamples as u64)
            .map(|r| evaluate(provider, &corpus.resample_split(seed + r)?, k_grid, seed + r, config_hash.clone()))
            .collect::<Result<Vec<_>>>()?
    };
    let errors: Vec<f64> = reports.iter().map(|r| r.error_rate).collect();
    let n = errors.len() as f64;
    let mean_error = errors.iter().sum::<f64>() / n;
    let std_error = if errors.len() > 1 {
        (errors.iter().map(|e| (e - mean_error).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(ResampledReport { provider: provider.id().to_string(), mean_error, std_error, reports })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Number of query documents.
    pub n_queries: usize,
    /// Number of reference documents each query is compared against.
    pub n_refs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Each query is timed this many times and the fastest run kept.
    pub repeats: usize,
    /// Also run the per-document loop and compare results bitwise.
    pub verify: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { n_queries: 100, n_refs: 500, batch_size: 500, seed: 0, repeats: 3, verify: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub provider: String,
    pub config_hash: String,
    pub batch_size: usize,
    pub n_queries: usize,
    pub n_refs: usize,
    /// Seconds to compare one query against all references.
    pub query_time: TimingSummary,
    /// Mean seconds per query-reference comparison.
    pub per_document_secs: f64,
    /// `Some(true)` when verification ran and batched equals sequential.
    pub matches_sequential: Option<bool>,
    #[serde(skip)]
    pub query_times: Vec<f64>,
    #[serde(skip)]
    pub distances: Vec<Vec<f64>>,
}

/// Times one-to-many comparisons in batches of `batch_size`. Queries are
/// sampled from all documents; references cycle through the training split
/// (all documents when it is empty).
pub fn bench_batch(provider: &dyn DistanceProvider, corpus: &LabeledCorpus, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.batch_size == 0 || cfg.repeats == 0 {
        return Err(Error::InvalidConfig("batch size and repeats must be at least 1".into()));
    }
    if corpus.documents.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let all: Vec<usize> = (0..corpus.documents.len()).collect();
    let queries: Vec<usize> = (0..cfg.n_queries).map(|_| *all.choose(&mut rng).expect("nonempty")).collect();
    let pool = if corpus.split.train.is_empty() { &all } else { &corpus.split.train };
    let refs: Vec<Document> = pool.iter().cycle().take(cfg.n_refs).map(|&i| corpus.documents[i].clone()).collect();

    let mut query_times = Vec::with_capacity(queries.len());
    let mut distances = Vec::with_capacity(queries.len());
    for &q in &queries {
        let query = &corpus.documents[q];
        let mut best = f64::INFINITY;
        let mut row = Vec::new();
        for _ in 0..cfg.repeats {
            let sw = Stopwatch::start();
            row = Vec::with_capacity(refs.len());
            for chunk in refs.chunks(cfg.batch_size) {
                row.extend(provider.batch(query, chunk)?);
            }
            best = best.min(sw.elapsed_secs());
        }
        query_times.push(best);
        distances.push(row);
    }
    let matches_sequential = if cfg.verify {
        let mut same = true;
        for (&q, row) in queries.iter().zip(&distances) {
            for (r, &d) in refs.iter().zip(row) {
                same &= provider.distance(&corpus.documents[q], r)?.to_bits() == d.to_bits();
            }
        }
        Some(same)
    } else {
        None
    };
    let query_time = TimingSummary::from_samples(&query_times);
    let per_document_secs = if cfg.n_refs == 0 { 0.0 } else { query_time.mean / cfg.n_refs as f64 };
    Ok(BenchReport {
        provider: provider.id().to_string(),
        config_hash: config_hash(&(provider.id(), cfg)),
        batch_size: cfg.batch_size,
        n_queries: queries.len(),
        n_refs: cfg.n_refs,
        query_time,
        per_document_secs,
        matches_sequential,
        query_times,
        distances,
    })
}

/// One JSON record per report.
pub fn write_records<T: Serialize>(mut out: impl Write, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

/// Per-query timings as CSV: `provider,batch_size,query,seconds`.
pub fn write_timings_csv(path: impl AsRef<Path>, rows: &[(String, usize, Vec<f64>)]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "provider,batch_size,query,seconds")?;
    for (provider, batch, times) in rows {
        for (q, t) in times.iter().enumerate() {
            writeln!(f, "{provider},{batch},{q},{t:e}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Split, Vocabulary};

    struct Squared<'a>(&'a dyn DistanceProvider);

    impl DistanceProvider for Squared<'_> {
        fn id(&self) -> &str {
            "squared"
        }
        fn distance(&self, a: &Document, b: &Document) -> Result<f64> {
            Ok(self.0.distance(a, b)?.powi(2))
        }
    }

    fn toy() -> (TreeProvider, LabeledCorpus) {
        let vocab = Vocabulary::new(["a", "b", "c", "d"]).unwrap();
        let tree = TreeAdjacency::from_parents(vec![None, Some(0), Some(0)], vec![1, 1, 2, 2], None).unwrap();
        let docs = vec![
            Document::new(vec![(0, 1.0)], Some(0), 4).unwrap(),
            Document::new(vec![(1, 1.0)], Some(0), 4).unwrap(),
            Document::new(vec![(2, 1.0)], Some(1), 4).unwrap(),
            Document::new(vec![(3, 0.5), (2, 0.5)], Some(1), 4).unwrap(),
            Document::new(vec![(0, 0.5), (3, 0.5)], Some(1), 4).unwrap(),
            Document::new(vec![(0, 1.0)], Some(0), 4).unwrap(),
            Document::new(vec![(3, 1.0)], Some(1), 4).unwrap(),
            Document::new(vec![(1, 0.9), (2, 0.1)], Some(0), 4).unwrap(),
        ];
        let split = Split { train: vec![0, 1, 2, 3, 4], valid: vec![7], test: vec![5, 6] };
        (TreeProvider::new("toy", tree), LabeledCorpus::new(vocab, docs, split))
    }

    #[test]
    fn one_nn_on_identical_document() {
        let (p, c) = toy();
        assert_eq!(knn_classify(&p, &c, 1).unwrap(), vec![0, 1]);
    }

    #[test]
    fn k_equal_train_size_gives_majority() {
        let (p, c) = toy();
        // Train labels: 0,0,1,1,1.
        assert_eq!(knn_classify(&p, &c, 5).unwrap(), vec![1, 1]);
    }

    #[test]
    fn resampling_keeps_sizes_and_averages() {
        let (p, c) = toy();
        let r = c.resample_split(4).unwrap();
        assert_eq!(r.split.test.len(), 2);
        assert_eq!(r.split.train.len(), 6);
        assert!(r.split.valid.is_empty());
        let mut all: Vec<usize> = r.split.train.iter().chain(&r.split.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());

        let one = evaluate_resampled(&p, &c, &[1], 1, 0, "h".into()).unwrap();
        let direct = evaluate(&p, &c, &[1], 0, "h".into()).unwrap();
        assert_eq!((one.mean_error, one.reports[0].chosen_k), (direct.error_rate, direct.chosen_k));
        assert_eq!(one.std_error, 0.0);
        let five = evaluate_resampled(&p, &c, &[1], 5, 0, "h".into()).unwrap();
        assert_eq!(five.reports.len(), 5);
        let mean = five.reports.iter().map(|r| r.error_rate).sum::<f64>() / 5.0;
        assert!((five.mean_error - mean).abs() < 1e-15);
        assert!(evaluate_resampled(&p, &c, &[1], 0, 0, "h".into()).is_err());
    }

    #[test]
    fn vote_tie_goes_to_nearest() {
        let labels = vec![3, 7, 7, 3];
        let sorted = vec![(0.1, 1), (0.2, 0), (0.3, 3), (0.4, 2)];
        assert_eq!(vote(&sorted, &labels, 2), 7);
        assert_eq!(vote(&sorted, &labels, 4), 7);
        assert_eq!(vote(&sorted, &labels, 3), 3);
    }

    #[test]
    fn monotone_transform_keeps_predictions() {
        let (p, c) = toy();
        let sq = Squared(&p);
        for k in 1..=5 {
            assert_eq!(knn_classify(&p, &c, k).unwrap(), knn_classify(&sq, &c, k).unwrap());
        }
    }

    #[test]
    fn k_selection_rules() {
        let (p, c) = toy();
        assert_eq!(select_k(&p, &c, &[1]).unwrap().k, 1);
        let sel = select_k(&p, &c, &[3, 1]).unwrap();
        assert!(sel.errors.iter().all(|&(_, e)| e == 0.0));
        assert_eq!(sel.k, 1);
        let mut no_valid = c.clone();
        no_valid.split.valid.clear();
        assert!(matches!(select_k(&p, &no_valid, &[1]), Err(Error::EmptySplit(_))));
        assert!(select_k(&p, &c, &[]).is_err());
        assert!(knn_classify(&p, &c, 0).is_err());
        assert!(knn_classify(&p, &c, 6).is_err());
    }

    #[test]
    fn bench_is_batch_size_invariant() {
        let (p, c) = toy();
        let base = BenchConfig { n_queries: 5, n_refs: 13, batch_size: 1, seed: 2, repeats: 1, verify: true };
        let r1 = bench_batch(&p, &c, &base).unwrap();
        assert_eq!(r1.matches_sequential, Some(true));
        for b in [2, 7, 13, 64] {
            let r = bench_batch(&p, &c, &BenchConfig { batch_size: b, ..base.clone() }).unwrap();
            assert_eq!(r.distances, r1.distances);
            assert_eq!(r.matches_sequential, Some(true));
        }
        assert_eq!(r1.provider, "toy");
        assert_eq!(r1.config_hash.len(), 16);
        let json = serde_json::to_string(&r1).unwrap();
        assert!(json.contains("config_hash") && json.contains("\"provider\":\"toy\""));
    }

    #[test]
    fn evaluate_reports_error_rate() {
        let (p, c) = toy();
        let r = evaluate(&p, &c, &[1, 3], 0, "h".into()).unwrap();
        assert_eq!(r.error_rate, 0.0);
        assert_eq!(r.chosen_k, 1);
        assert_eq!(r.n_queries, 2);
    }
}
