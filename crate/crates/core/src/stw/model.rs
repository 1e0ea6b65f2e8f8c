use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{unit_upper_inverse, CsrMatrix};
use crate::measures::{difference, Document};
use crate::tree::{InternalTree, TreeAdjacency};

/// Smooth approximation of `|x|`, `x (e^{αx} - e^{-αx}) / (2 + e^{αx} + e^{-αx})`,
/// evaluated as `|x| tanh(α|x|/2)`. The two are equal algebraically; this
/// form cannot overflow and is exactly even.
pub fn smooth_abs(x: f64, alpha: f64) -> f64 {
    let ax = x.abs();
    ax * (0.5 * alpha * ax).tanh()
}

/// `d/dx [x tanh(αx/2)] = tanh(αx/2) + (αx/2) sech²(αx/2)`.
pub fn smooth_abs_derivative(x: f64, alpha: f64) -> f64 {
    let t = (0.5 * alpha * x).tanh();
    t + 0.5 * alpha * x * (1.0 - t * t)
}

/// Relaxed tree: fixed internal adjacency `D1`, trainable leaf-attachment
/// logits `Θ` (`n_internal x n_leaf`), unit edge lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftTreeModel {
    internal: InternalTree,
    inv_d1: CsrMatrix,
    theta: Array2<f64>,
    alpha: f64,
}

impl SoftTreeModel {
    pub fn from_logits(internal: InternalTree, theta: Array2<f64>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
        }
        if theta.nrows() != internal.len() {
            return Err(Error::DimensionMismatch { expected: internal.len(), got: theta.nrows() });
        }
        if theta.ncols() == 0 {
            return Err(Error::InvalidConfig("model needs at least one leaf".into()));
        }
        let inv_d1 = unit_upper_inverse(&internal.to_csr())?;
        Ok(SoftTreeModel { internal, inv_d1, theta, alpha })
    }

    /// Logits drawn i.i.d. from `U[-0.01, 0.01]`, so every word starts almost
    /// uniformly spread over the internal nodes.
    pub fn initialize(internal: InternalTree, n_leaf: usize, alpha: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = Array2::from_shape_simple_fn((internal.len(), n_leaf), || rng.gen_range(-0.01..=0.01));
        SoftTreeModel::from_logits(internal, theta, alpha)
    }

    pub fn n_internal(&self) -> usize {
        self.internal.len()
    }

    pub fn n_leaf(&self) -> usize {
        self.theta.ncols()
    }

    pub fn internal(&self) -> &InternalTree {
        &self.internal
    }

    pub fn inv_d1(&self) -> &CsrMatrix {
        &self.inv_d1
    }

    pub fn theta(&self) -> &Array2<f64> {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut Array2<f64> {
        &mut self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        assert!(alpha > 0.0);
        self.alpha = alpha;
        self
    }

    /// Column-wise softmax of `Θ`: column `j` is the parent distribution of
    /// word `j`.
    pub fn d2(&self) -> Array2<f64> {
        let mut d2 = self.theta.clone();
        for mut col in d2.axis_iter_mut(Axis(1)) {
            let max = col.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            col.mapv_inplace(|x| (x - max).exp());
            let sum = col.sum();
            col.mapv_inplace(|x| x / sum);
        }
        d2
    }

    /// Subtree probabilities of the leaves, `P = (I - D1)^-1 D2`.
    pub fn subtree_probabilities(&self, d2: &Array2<f64>) -> Array2<f64> {
        self.inv_d1.mul_dense(d2).expect("shapes fixed at construction")
    }

    /// Full relaxed adjacency `D_par`.
    pub fn assembled(&self) -> Array2<f64> {
        let n_in = self.n_internal();
        let n = n_in + self.n_leaf();
        let mut full = Array2::zeros((n, n));
        full.slice_mut(ndarray::s![..n_in, ..n_in]).assign(&self.internal.to_dense());
        full.slice_mut(ndarray::s![..n_in, n_in..]).assign(&self.d2());
        full
    }
}

/// Soft tree-Wasserstein distance with unit edge lengths:
/// `sum_v |Σ_x P(x|v) (a(x) - b(x))|_α` over internal and leaf nodes.
pub fn soft_tree_wasserstein(model: &SoftTreeModel, a: &Document, b: &Document) -> Result<f64> {
    let n_leaf = model.n_leaf();
    a.check_dim(n_leaf)?;
    b.check_dim(n_leaf)?;
    let delta = difference(a, b, n_leaf);
    let d2 = model.d2();
    let support: Vec<(usize, f64)> = delta.iter().copied().enumerate().filter(|&(_, d)| d != 0.0).collect();
    // (I - D1)^-1 (D2 Δ)
    let mut d2_delta = Array1::<f64>::zeros(model.n_internal());
    for (v, row) in d2.axis_iter(Axis(0)).enumerate() {
        d2_delta[v] = support.iter().map(|&(x, d)| row[x] * d).sum();
    }
    let alpha = model.alpha();
    let mut total = 0.0;
    for v in 0..model.n_internal() {
        let (idx, val) = model.inv_d1.row(v);
        let u: f64 = idx.iter().zip(val).map(|(&k, &p)| p * d2_delta[k]).sum();
        total += smooth_abs(u, alpha);
    }
    for &d in &delta {
        total += smooth_abs(d, alpha);
    }
    Ok(total)
}

/// Attaches each word to its most probable parent (lowest index on ties).
/// The result satisfies the tree conditions by construction.
pub fn harden(model: &SoftTreeModel) -> TreeAdjacency {
    let d2 = model.d2();
    let parents = d2
        .axis_iter(Axis(1))
        .map(|col| {
            let mut best = 0;
            for (i, &p) in col.iter().enumerate() {
                if p > col[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    TreeAdjacency::from_internal(model.internal(), parents, None).expect("hardened model is a valid tree")
}
