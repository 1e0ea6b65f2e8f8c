//! Independent reference computations. Nothing here calls the code under
//! test beyond reading its inputs.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use stw_core::stw::{contrastive_loss, smooth_abs, PairBatch, SoftTreeModel, TrainConfig};
use stw_core::Document;

pub fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// `(I - D_par)^-1` by general LU inversion.
pub fn dense_inverse(d_par: &Array2<f64>) -> DMatrix<f64> {
    let n = d_par.nrows();
    (DMatrix::identity(n, n) - to_na(d_par)).try_inverse().expect("I - D_par is unit triangular")
}

/// Soft distance straight from the relaxed adjacency: invert `I - D_par`,
/// read subtree probabilities off every row, sum smooth absolute values.
pub fn soft_distance_dense(model: &SoftTreeModel, a: &Document, b: &Document) -> f64 {
    let n_in = model.n_internal();
    let n_leaf = model.n_leaf();
    let p = dense_inverse(&model.assembled());
    let (da, db) = (a.dense(n_leaf), b.dense(n_leaf));
    (0..n_in + n_leaf)
        .map(|v| {
            let u: f64 = (0..n_leaf).map(|x| p[(v, n_in + x)] * (da[x] - db[x])).sum();
            smooth_abs(u, model.alpha())
        })
        .sum()
}

/// Minimum cost over the vertices of the transport polytope, found by trying
/// every support of size `n + m - 1` and solving the marginal equations.
pub fn transport_by_enumeration(a: &[f64], b: &[f64], cost: &Array2<f64>) -> f64 {
    let (n, m) = (a.len(), b.len());
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let k = n + m - 1;
    let rhs = DVector::from_iterator(n + m, a.iter().chain(b).copied());
    let mut best = f64::INFINITY;
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        let eq = DMatrix::from_fn(n + m, k, |r, c| {
            let (i, j) = cells[pick[c]];
            if r == i || r == n + j {
                1.0
            } else {
                0.0
            }
        });
        let svd = eq.clone().svd(true, true);
        if svd.rank(1e-9) == k {
            let x = svd.solve(&rhs, 1e-12).expect("svd solve");
            if (&eq * &x - &rhs).amax() < 1e-9 && x.iter().all(|&v| v >= -1e-12) {
                let c: f64 = x.iter().zip(&pick).map(|(v, &p)| v * cost[[cells[p].0, cells[p].1]]).sum();
                best = best.min(c);
            }
        }
        // Next k-combination of the cells.
        let mut i = k;
        while i > 0 && pick[i - 1] == cells.len() - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        pick[i - 1] += 1;
        for j in i..k {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

/// Central differences of the contrastive loss in every logit.
pub fn finite_difference_gradient(
    model: &SoftTreeModel,
    batch: &PairBatch,
    docs: &[Document],
    cfg: &TrainConfig,
    h: f64,
) -> Array2<f64> {
    let shape = model.theta().dim();
    let mut grad = Array2::zeros(shape);
    for i in 0..shape.0 {
        for j in 0..shape.1 {
            let mut up = model.clone();
            up.theta_mut()[[i, j]] += h;
            let mut down = model.clone();
            down.theta_mut()[[i, j]] -= h;
            let fu = contrastive_loss(&up, batch, docs, cfg).unwrap();
            let fd = contrastive_loss(&down, batch, docs, cfg).unwrap();
            grad[[i, j]] = (fu - fd) / (2.0 * h);
        }
    }
    grad
}
