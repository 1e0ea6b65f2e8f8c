#![allow(dead_code)]

pub mod oracle;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stw_core::measures::{Document, LabeledCorpus, Split, Vocabulary};
use stw_core::tree::{InternalTree, TreeAdjacency};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random internal parents with every parent index below its child.
pub fn random_internal(rng: &mut ChaCha8Rng, n_in: usize) -> Vec<Option<usize>> {
    (0..n_in).map(|i| if i == 0 { None } else { Some(rng.gen_range(0..i)) }).collect()
}

/// Random tree with `n` nodes in total, at least one leaf, and optional
/// random edge lengths in `[0.1, 2)`.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize, weighted: bool) -> TreeAdjacency {
    assert!(n >= 2);
    let n_in = rng.gen_range(1..n);
    let n_leaf = n - n_in;
    let internal = random_internal(rng, n_in);
    let leaves = (0..n_leaf).map(|_| rng.gen_range(0..n_in)).collect();
    let w = weighted.then(|| {
        let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        w[0] = 1.0;
        w
    });
    TreeAdjacency::from_parents(internal, leaves, w).unwrap()
}

pub fn random_internal_tree(rng: &mut ChaCha8Rng, n_in: usize) -> InternalTree {
    InternalTree::from_parents(random_internal(rng, n_in)).unwrap()
}

/// Random point on the simplex with `support` distinct words out of `n`.
pub fn random_document(rng: &mut ChaCha8Rng, n: usize, support: usize, label: Option<i64>) -> Document {
    let mut words: Vec<usize> = (0..n).collect();
    for i in 0..support.min(n) {
        let j = rng.gen_range(i..n);
        words.swap(i, j);
    }
    let raw: Vec<f64> = (0..support.min(n)).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let entries = words.iter().zip(&raw).map(|(&w, &r)| (w, r / total)).collect();
    Document::new(entries, label, n).unwrap()
}

pub fn dense(doc: &Document, n: usize) -> Vec<f64> {
    doc.dense(n)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, dim), |_| rng.gen_range(-1.0..1.0))
}

/// `n_docs` random documents over `n_words` words, all in the training split.
pub fn random_corpus(rng: &mut ChaCha8Rng, n_words: usize, n_docs: usize, max_support: usize) -> LabeledCorpus {
    let vocab = Vocabulary::new((0..n_words).map(|i| format!("w{i}"))).unwrap();
    let docs = (0..n_docs)
        .map(|i| {
            let s = rng.gen_range(1..=max_support);
            random_document(rng, n_words, s, Some((i % 2) as i64))
        })
        .collect();
    LabeledCorpus::new(vocab, docs, Split { train: (0..n_docs).collect(), valid: vec![], test: vec![] })
}

/// A tiny training problem for gradient checks.
pub struct GradientInstance {
    pub model: stw_core::stw::SoftTreeModel,
    pub docs: Vec<Document>,
    pub batch: stw_core::stw::PairBatch,
    pub cfg: stw_core::stw::TrainConfig,
}

/// Up to 6 internal nodes, up to 10 words, `alpha` in `[0.5, 10]`, six
/// labeled documents and every pair among them.
pub fn gradient_instance(rng: &mut ChaCha8Rng) -> GradientInstance {
    use stw_core::stw::{PairBatch, SoftTreeModel, TrainConfig};
    let n_in = rng.gen_range(2..=6);
    let n_leaf = rng.gen_range(2..=10);
    let internal = random_internal_tree(rng, n_in);
    let theta = Array2::from_shape_simple_fn((n_in, n_leaf), || rng.gen_range(-1.5..1.5));
    let alpha = rng.gen_range(0.5..=10.0);
    let model = SoftTreeModel::from_logits(internal, theta, alpha).unwrap();
    let docs: Vec<Document> = (0..6)
        .map(|i| {
            let s = rng.gen_range(1..=n_leaf.min(4));
            random_document(rng, n_leaf, s, Some(i % 2))
        })
        .collect();
    let batch = PairBatch::from_indices(&docs, &(0..6).collect::<Vec<_>>());
    let cfg = TrainConfig { margin: rng.gen_range(0.5..8.0), ..TrainConfig::default() };
    GradientInstance { model, docs, batch, cfg }
}

/// Floor on the denominator of elementwise relative gradient error. Central
/// differences with step 1e-6 carry about 1e-9 of absolute noise, which
/// would dominate the ratio for entries near zero.
pub const GRADIENT_REL_FLOOR: f64 = 1e-3;

/// Largest elementwise `|a - f| / max(|a|, |f|, GRADIENT_REL_FLOOR)`.
pub fn gradient_error(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(GRADIENT_REL_FLOOR))
        .fold(0.0, f64::max)
}

/// Random document with between 1 and `max_support` words.
pub fn random_document_upto(rng: &mut ChaCha8Rng, n: usize, max_support: usize) -> Document {
    let s = rng.gen_range(1..=max_support.min(n));
    random_document(rng, n, s, None)
}
