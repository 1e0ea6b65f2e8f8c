use ndarray::{Array2, Axis};
use rayon::prelude::*;

use super::model::{smooth_abs, smooth_abs_derivative, SoftTreeModel};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::measures::Document;

/// Document index pairs with equal labels (`positive`) and different labels
/// (`negative`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairBatch {
    pub positive: Vec<(usize, usize)>,
    pub negative: Vec<(usize, usize)>,
}

impl PairBatch {
    /// Checks that each listed pair has the label relation its side claims.
    pub fn new(positive: Vec<(usize, usize)>, negative: Vec<(usize, usize)>, docs: &[Document]) -> Result<Self> {
        let label = |i: usize| -> Result<i64> {
            docs.get(i)
                .ok_or_else(|| Error::InvalidConfig(format!("pair references missing document {i}")))?
                .label()
                .ok_or_else(|| Error::InvalidConfig(format!("document {i} is unlabeled")))
        };
        for &(i, j) in &positive {
            if label(i)? != label(j)? {
                return Err(Error::InvalidConfig(format!("positive pair ({i},{j}) has different labels")));
            }
        }
        for &(i, j) in &negative {
            if label(i)? == label(j)? {
                return Err(Error::InvalidConfig(format!("negative pair ({i},{j}) has equal labels")));
            }
        }
        Ok(PairBatch { positive, negative })
    }

    /// All pairs `i < j` (in list order) among the labeled documents in
    /// `indices`.
    pub fn from_indices(docs: &[Document], indices: &[usize]) -> Self {
        let labeled: Vec<(usize, i64)> = indices.iter().filter_map(|&i| docs[i].label().map(|l| (i, l))).collect();
        let mut batch = PairBatch::default();
        for (s, &(i, li)) in labeled.iter().enumerate() {
            for &(j, lj) in &labeled[s + 1..] {
                if li == lj {
                    batch.positive.push((i, j));
                } else {
                    batch.negative.push((i, j));
                }
            }
        }
        batch
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }

    pub fn len(&self) -> usize {
        self.positive.len() + self.negative.len()
    }
}

struct PairEval {
    distance: f64,
    /// `|·|_α'` at each internal node's subtree difference.
    slope: Vec<f64>,
    /// Sparse scaled difference `s·a - s·b`.
    delta: Vec<(usize, f64)>,
}

fn scaled_difference(a: &Document, b: &Document, scale: f64) -> Vec<(usize, f64)> {
    let (ea, eb) = (a.entries(), b.entries());
    let mut out = Vec::with_capacity(ea.len() + eb.len());
    let (mut i, mut j) = (0, 0);
    while i < ea.len() || j < eb.len() {
        match (ea.get(i), eb.get(j)) {
            (Some(&(pa, ma)), Some(&(pb, mb))) if pa == pb => {
                out.push((pa, scale * ma - scale * mb));
                i += 1;
                j += 1;
            }
            (Some(&(pa, ma)), Some(&(pb, _))) if pa < pb => {
                out.push((pa, scale * ma));
                i += 1;
            }
            (Some(&(pa, ma)), None) => {
                out.push((pa, scale * ma));
                i += 1;
            }
            (_, Some(&(pb, mb))) => {
                out.push((pb, -(scale * mb)));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

fn evaluate_pair(p: &Array2<f64>, alpha: f64, a: &Document, b: &Document, scale: f64, with_slope: bool) -> PairEval {
    let delta = scaled_difference(a, b, scale);
    let n_in = p.nrows();
    let mut distance = 0.0;
    let mut slope = Vec::with_capacity(if with_slope { n_in } else { 0 });
    for row in p.axis_iter(Axis(0)) {
        let u: f64 = delta.iter().map(|&(x, d)| row[x] * d).sum();
        distance += smooth_abs(u, alpha);
        if with_slope {
            slope.push(smooth_abs_derivative(u, alpha));
        }
    }
    for &(_, d) in &delta {
        distance += smooth_abs(d, alpha);
    }
    PairEval { distance, slope, delta }
}

fn objective(
    model: &SoftTreeModel,
    batch: &PairBatch,
    docs: &[Document],
    margin: f64,
    scale: f64,
    want_grad: bool,
) -> Result<(f64, Option<Array2<f64>>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n_leaf = model.n_leaf();
    for &(i, j) in batch.positive.iter().chain(&batch.negative) {
        for k in [i, j] {
            docs.get(k)
                .ok_or_else(|| Error::InvalidConfig(format!("pair references missing document {k}")))?
                .check_dim(n_leaf)?;
        }
    }
    let d2 = model.d2();
    let p = model.subtree_probabilities(&d2);
    let alpha = model.alpha();
    let pairs: Vec<(usize, usize)> = batch.positive.iter().chain(&batch.negative).copied().collect();
    let evals: Vec<PairEval> =
        pairs.par_iter().map(|&(i, j)| evaluate_pair(&p, alpha, &docs[i], &docs[j], scale, want_grad)).collect();
    let (n_pos, n_neg) = (batch.positive.len(), batch.negative.len());
    let (pos, neg) = evals.split_at(n_pos);

    let pos_term = if n_pos == 0 {
        log::warn!("contrastive loss: batch has no positive pairs");
        0.0
    } else {
        pos.iter().map(|e| e.distance).sum::<f64>() / n_pos as f64
    };
    let neg_term = if n_neg == 0 {
        log::warn!("contrastive loss: batch has no negative pairs");
        0.0
    } else {
        neg.iter().map(|e| e.distance.min(margin)).sum::<f64>() / n_neg as f64
    };
    let loss = pos_term - neg_term;
    if !want_grad {
        return Ok((loss, None));
    }

    // Distances at or above the margin are clamped and carry no gradient.
    let coef: Vec<f64> = pos
        .iter()
        .map(|_| 1.0 / n_pos as f64)
        .chain(neg.iter().map(|e| if e.distance < margin { -1.0 / n_neg as f64 } else { 0.0 }))
        .collect();
    let n_in = model.n_internal();
    // dL/dP, one row per internal node, each row summed over pairs in order.
    let rows: Vec<Vec<f64>> = (0..n_in)
        .into_par_iter()
        .map(|v| {
            let mut row = vec![0.0; n_leaf];
            for (e, &c) in evals.iter().zip(&coef) {
                if c == 0.0 {
                    continue;
                }
                let g = c * e.slope[v];
                for &(x, d) in &e.delta {
                    row[x] += g * d;
                }
            }
            row
        })
        .collect();
    let grad_p = Array2::from_shape_vec((n_in, n_leaf), rows.concat()).expect("row lengths");
    let grad_d2 = model.inv_d1().transpose_mul_dense(&grad_p)?;
    // Column softmax backward: dΘ = D2 ∘ (dD2 - <D2, dD2>_col).
    let mut grad_theta = Array2::zeros((n_in, n_leaf));
    for x in 0..n_leaf {
        let col_p = d2.column(x);
        let col_g = grad_d2.column(x);
        let inner: f64 = col_p.iter().zip(col_g.iter()).map(|(a, b)| a * b).sum();
        for v in 0..n_in {
            grad_theta[[v, x]] = col_p[v] * (col_g[v] - inner);
        }
    }
    Ok((loss, Some(grad_theta)))
}

/// Mean soft distance over positive pairs minus mean `min(distance, margin)`
/// over negative pairs, with masses scaled by `cfg.mass_scale`.
pub fn contrastive_loss(model: &SoftTreeModel, batch: &PairBatch, docs: &[Document], cfg: &TrainConfig) -> Result<f64> {
    Ok(objective(model, batch, docs, cfg.margin, cfg.mass_scale, false)?.0)
}

/// Analytic gradient of [`contrastive_loss`] with respect to `Θ`.
pub fn loss_gradient(
    model: &SoftTreeModel,
    batch: &PairBatch,
    docs: &[Document],
    cfg: &TrainConfig,
) -> Result<Array2<f64>> {
    Ok(loss_and_gradient(model, batch, docs, cfg)?.1)
}

pub fn loss_and_gradient(
    model: &SoftTreeModel,
    batch: &PairBatch,
    docs: &[Document],
    cfg: &TrainConfig,
) -> Result<(f64, Array2<f64>)> {
    let (loss, grad) = objective(model, batch, docs, cfg.margin, cfg.mass_scale, true)?;
    Ok((loss, grad.expect("gradient requested")))
}
