//! Browser bindings for the demo page in `www/`.
//!
//! Three operations: the smoothed absolute value curve, training a tree on
//! the synthetic instrument corpus, and comparing two word lists under the
//! learned tree.

use ndarray::Array2;
use serde::Serialize;
use stw_core::data_io::synthetic_instruments;
use stw_core::eval::{evaluate, TreeProvider};
use stw_core::measures::{normalize_counts, UnknownTokenPolicy};
use stw_core::ot::exact_ot;
use stw_core::stw::{harden, smooth_abs, soft_tree_wasserstein, train, EpochRecord, SoftTreeModel, TrainConfig};
use stw_core::tree::tree_wasserstein;
use stw_core::{Document, LabeledCorpus, TreeAdjacency};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// `points` samples of `smooth_abs(x, alpha)` on `[-extent, extent]`, as
/// interleaved `x, y` pairs.
#[wasm_bindgen]
pub fn smooth_abs_curve(alpha: f64, extent: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .flat_map(|i| {
            let x = -extent + 2.0 * extent * i as f64 / (points - 1) as f64;
            [x, smooth_abs(x, alpha)]
        })
        .collect()
}

#[derive(Serialize)]
struct Summary<'a> {
    test_error: f64,
    chosen_k: usize,
    best_epoch: usize,
    log: &'a [EpochRecord],
    words: &'a [String],
    /// Internal node each word hangs from after hardening.
    leaf_parents: &'a [usize],
    internal_parents: &'a [Option<usize>],
}

#[derive(Serialize)]
struct Comparison {
    tree: f64,
    soft: f64,
    /// Exact transport with tree path lengths as ground cost.
    transport: f64,
}

/// A trained model and its corpus, kept alive between calls.
#[wasm_bindgen]
pub struct Demo {
    corpus: LabeledCorpus,
    model: SoftTreeModel,
    tree: TreeAdjacency,
    summary: String,
}

#[wasm_bindgen]
impl Demo {
    /// Trains on a fresh synthetic corpus over a 5-ary internal tree of
    /// depth 1.
    #[wasm_bindgen(constructor)]
    pub fn new(n_train: usize, n_test: usize, seed: u64, margin: f64, epochs: usize) -> Result<Demo, JsError> {
        let corpus = synthetic_instruments(n_train, n_test, seed);
        let cfg = TrainConfig { margin, epochs, seed, depth: 1, ..TrainConfig::default() };
        let outcome = train(&corpus, &cfg).map_err(js_err)?;
        let tree = harden(&outcome.model);
        let provider = TreeProvider::new("stw", tree.clone());
        let k_grid: Vec<usize> = (1..=9).step_by(2).collect();
        let report = evaluate(&provider, &corpus, &k_grid, seed, String::new()).map_err(js_err)?;
        let summary = serde_json::to_string(&Summary {
            test_error: report.error_rate,
            chosen_k: report.chosen_k,
            best_epoch: outcome.best_epoch,
            log: &outcome.log,
            words: corpus.vocabulary.words(),
            leaf_parents: tree.leaf_parents(),
            internal_parents: tree.internal_parents(),
        })
        .map_err(js_err)?;
        Ok(Demo { corpus, model: outcome.model, tree, summary })
    }

    /// Training and evaluation results as JSON.
    pub fn summary(&self) -> String {
        self.summary.clone()
    }

    /// Distances between two whitespace-separated word lists, as JSON.
    /// Repeated words add mass; unknown words are an error.
    pub fn compare(&self, a: &str, b: &str) -> Result<String, JsError> {
        let a = self.document(a)?;
        let b = self.document(b)?;
        let tree = tree_wasserstein(&self.tree, &a, &b).map_err(js_err)?;
        let soft = soft_tree_wasserstein(&self.model, &a, &b).map_err(js_err)?;
        let transport = self.transport(&a, &b)?;
        serde_json::to_string(&Comparison { tree, soft, transport }).map_err(js_err)
    }
}

impl Demo {
    fn document(&self, text: &str) -> Result<Document, JsError> {
        let tokens = text.split_whitespace().map(|w| (w.to_lowercase(), 1.0));
        normalize_counts(tokens, &self.corpus.vocabulary, UnknownTokenPolicy::Error, None).map_err(js_err)
    }

    fn transport(&self, a: &Document, b: &Document) -> Result<f64, JsError> {
        let (ea, eb) = (a.entries(), b.entries());
        let cost = Array2::from_shape_fn((ea.len(), eb.len()), |(i, j)| self.tree.leaf_path_length(ea[i].0, eb[j].0));
        let ma: Vec<f64> = ea.iter().map(|e| e.1).collect();
        let mb: Vec<f64> = eb.iter().map(|e| e.1).collect();
        Ok(exact_ot(&ma, &mb, &cost).map_err(js_err)?.cost)
    }
}
