//! Hard tree metrics over a vocabulary.
//!
//! Nodes are numbered so that internal nodes come first (`0..n_internal`, root
//! at 0, breadth-first) and leaves follow in vocabulary order. The parent-child
//! adjacency `D_par[parent, child] = 1` is then strictly upper triangular with
//! block structure
//!
//! ```text
//! D_par = | D1  D2 |      (I - D_par)^-1 = | (I-D1)^-1   (I-D1)^-1 D2 |
//!         |  0   0 |                       |     0             I       |
//! ```
//!
//! and the tree-Wasserstein distance between two documents is the L1 norm of
//! `w ∘ (I - D_par)^-1 (0, a - b)`. Only `C = (I-D1)^-1 D2` needs to be stored.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{unit_upper_inverse, CsrMatrix};
use crate::measures::{difference, Document};

/// Largest internal tree `perfect_kary_internal` will build.
pub const MAX_INTERNAL_NODES: usize = 2_000_000;

/// A violated adjacency condition, with 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeViolation {
    NotSquare {
        rows: usize,
        cols: usize,
    },
    NonBinary {
        row: usize,
        col: usize,
        value: f64,
    },
    /// Entry on or below the diagonal is nonzero.
    NotStrictlyUpper {
        row: usize,
        col: usize,
    },
    /// The root column must be all zero.
    RootHasParent {
        rows: Vec<usize>,
    },
    /// Every non-root column must sum to exactly one.
    ColumnSum {
        col: usize,
        sum: f64,
    },
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeViolation::NotSquare { rows, cols } => write!(f, "matrix is {rows}x{cols}, not square"),
            TreeViolation::NonBinary { row, col, value } => write!(f, "entry ({row},{col}) = {value} is not 0 or 1"),
            TreeViolation::NotStrictlyUpper { row, col } => {
                write!(f, "entry ({row},{col}) is on or below the diagonal")
            }
            TreeViolation::RootHasParent { rows } => write!(f, "root column is nonzero at rows {rows:?}"),
            TreeViolation::ColumnSum { col, sum } => write!(f, "column {col} sums to {sum}, expected 1"),
        }
    }
}

fn check_adjacency(d_par: &Array2<f64>, tol: f64, binary: bool) -> std::result::Result<(), Vec<TreeViolation>> {
    let (rows, cols) = d_par.dim();
    if rows != cols {
        return Err(vec![TreeViolation::NotSquare { rows, cols }]);
    }
    let mut out = Vec::new();
    for ((i, j), &v) in d_par.indexed_iter() {
        let bad = if binary { v != 0.0 && v != 1.0 } else { !(-tol..=1.0 + tol).contains(&v) };
        if bad {
            out.push(TreeViolation::NonBinary { row: i, col: j, value: v });
        }
        if j <= i && v != 0.0 {
            out.push(TreeViolation::NotStrictlyUpper { row: i, col: j });
        }
    }
    if rows > 0 {
        let root_rows: Vec<usize> = (0..rows).filter(|&i| d_par[[i, 0]] != 0.0).collect();
        if !root_rows.is_empty() {
            out.push(TreeViolation::RootHasParent { rows: root_rows });
        }
    }
    for j in 1..cols {
        let sum: f64 = d_par.column(j).sum();
        if (sum - 1.0).abs() > tol {
            out.push(TreeViolation::ColumnSum { col: j, sum });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Checks that a binary adjacency matrix is a directed tree rooted at node 0:
/// strictly upper triangular, root column zero, every other column summing to
/// one.
pub fn validate_tree(d_par: &Array2<f64>) -> std::result::Result<(), Vec<TreeViolation>> {
    check_adjacency(d_par, 0.0, true)
}

/// Relaxed form of [`validate_tree`] for matrices with entries in `[0, 1]`,
/// with column sums compared at tolerance `tol`.
pub fn validate_relaxed(d_par: &Array2<f64>, tol: f64) -> std::result::Result<(), Vec<TreeViolation>> {
    check_adjacency(d_par, tol, false)
}

fn violations_to_error(v: Vec<TreeViolation>) -> Error {
    let msg: Vec<String> = v.iter().map(ToString::to_string).collect();
    Error::InvalidTree(msg.join("; "))
}

/// Subtree membership: entry `(i, j)` is 1 iff node `j` lies in the subtree
/// rooted at node `i`. Equals `(I - D_par)^-1`.
pub fn subtree_matrix(d_par: &Array2<f64>) -> Result<Array2<f64>> {
    validate_tree(d_par).map_err(violations_to_error)?;
    Ok(unit_upper_inverse(&CsrMatrix::from_dense(d_par))?.to_dense())
}

/// The informative blocks of `(I - D_par)^-1`: `(I - D1)^-1` and
/// `C = (I - D1)^-1 D2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n_internal: usize,
    n_leaf: usize,
    inv_d1: CsrMatrix,
    c: CsrMatrix,
}

impl EmbeddingMatrix {
    pub fn n_internal(&self) -> usize {
        self.n_internal
    }

    pub fn n_leaf(&self) -> usize {
        self.n_leaf
    }

    pub fn inv_d1(&self) -> &CsrMatrix {
        &self.inv_d1
    }

    pub fn c(&self) -> &CsrMatrix {
        &self.c
    }

    /// Nonzeros of `C`.
    pub fn nnz(&self) -> usize {
        self.c.nnz()
    }

    /// Full `(I - D_par)^-1` with the identity block on the leaves.
    pub fn assemble(&self) -> Array2<f64> {
        let n = self.n_internal + self.n_leaf;
        let mut out = Array2::zeros((n, n));
        for i in 0..self.n_internal {
            let (idx, val) = self.inv_d1.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                out[[i, j]] = v;
            }
            let (idx, val) = self.c.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                out[[i, self.n_internal + j]] = v;
            }
        }
        for j in 0..self.n_leaf {
            out[[self.n_internal + j, self.n_internal + j]] = 1.0;
        }
        out
    }
}

pub fn block_inverse_csr(d1: &CsrMatrix, d2: &CsrMatrix) -> Result<EmbeddingMatrix> {
    if d1.rows() != d1.cols() {
        return Err(Error::DimensionMismatch { expected: d1.rows(), got: d1.cols() });
    }
    if d2.rows() != d1.rows() {
        return Err(Error::DimensionMismatch { expected: d1.rows(), got: d2.rows() });
    }
    let inv_d1 = unit_upper_inverse(d1)?;
    let c = inv_d1.mul(d2)?;
    Ok(EmbeddingMatrix { n_internal: d1.rows(), n_leaf: d2.cols(), inv_d1, c })
}

/// `(I - D1)^-1` by back substitution and `C = (I - D1)^-1 D2`. Works for
/// relaxed (real-valued) blocks too.
pub fn block_inverse(d1: &Array2<f64>, d2: &Array2<f64>) -> Result<EmbeddingMatrix> {
    block_inverse_csr(&CsrMatrix::from_dense(d1), &CsrMatrix::from_dense(d2))
}

/// Internal tree given by parent pointers in breadth-first order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InternalTree {
    parents: Vec<Option<usize>>,
}

impl InternalTree {
    pub fn from_parents(parents: Vec<Option<usize>>) -> Result<Self> {
        check_internal_parents(&parents)?;
        Ok(InternalTree { parents })
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn depths(&self) -> Vec<usize> {
        depths_from_parents(&self.parents)
    }

    pub fn depth(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    pub fn to_csr(&self) -> CsrMatrix {
        parents_to_csr(&self.parents, self.parents.len())
    }

    pub fn to_dense(&self) -> Array2<f64> {
        self.to_csr().to_dense()
    }
}

/// `D1` of a perfect `k`-ary tree of the given depth, nodes in breadth-first
/// order. Has `(k^(depth+1) - 1) / (k - 1)` nodes (`depth + 1` for `k = 1`).
pub fn perfect_kary_internal(k: usize, depth: usize) -> Result<InternalTree> {
    if k == 0 {
        return Err(Error::InvalidConfig("branching factor must be at least 1".into()));
    }
    let nodes: u128 = if k == 1 {
        depth as u128 + 1
    } else {
        let kk = k as u128;
        let pow = u32::try_from(depth + 1)
            .ok()
            .and_then(|e| kk.checked_pow(e))
            .ok_or(Error::Overflow { nodes: u128::MAX, cap: MAX_INTERNAL_NODES })?;
        (pow - 1) / (kk - 1)
    };
    if nodes > MAX_INTERNAL_NODES as u128 {
        return Err(Error::Overflow { nodes, cap: MAX_INTERNAL_NODES });
    }
    let parents = (0..nodes as usize).map(|i| if i == 0 { None } else { Some((i - 1) / k) }).collect();
    Ok(InternalTree { parents })
}

fn check_internal_parents(parents: &[Option<usize>]) -> Result<()> {
    if parents.is_empty() {
        return Err(Error::InvalidTree("tree needs a root".into()));
    }
    for (i, p) in parents.iter().enumerate() {
        match (i, p) {
            (0, None) => {}
            (0, Some(_)) => return Err(Error::InvalidTree("root has a parent".into())),
            (_, None) => return Err(Error::InvalidTree(format!("internal node {i} has no parent"))),
            (_, Some(p)) if *p >= i => {
                return Err(Error::InvalidTree(format!("node {i} has parent {p}; parents must precede children")))
            }
            _ => {}
        }
    }
    Ok(())
}

fn depths_from_parents(parents: &[Option<usize>]) -> Vec<usize> {
    let mut depth = vec![0; parents.len()];
    for i in 1..parents.len() {
        depth[i] = depth[parents[i].expect("validated")] + 1;
    }
    depth
}

fn parents_to_csr(parents: &[Option<usize>], n_rows: usize) -> CsrMatrix {
    let mut rows = vec![Vec::new(); n_rows];
    for (child, p) in parents.iter().enumerate() {
        if let Some(p) = p {
            rows[*p].push((child, 1.0));
        }
    }
    CsrMatrix::from_rows(parents.len(), rows)
}

/// A rooted tree whose leaves are vocabulary words, with edge lengths.
/// `edge_lengths[v]` is the length of the edge from `v` to its parent; the
/// root entry is fixed to 1 and cancels for normalized measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeAdjacency {
    internal_parents: Vec<Option<usize>>,
    leaf_parents: Vec<usize>,
    edge_lengths: Vec<f64>,
    depths: Vec<usize>,
    embedding: EmbeddingMatrix,
}

impl TreeAdjacency {
    /// `edge_lengths = None` means all ones.
    pub fn from_parents(
        internal_parents: Vec<Option<usize>>,
        leaf_parents: Vec<usize>,
        edge_lengths: Option<Vec<f64>>,
    ) -> Result<Self> {
        check_internal_parents(&internal_parents)?;
        let n_in = internal_parents.len();
        if leaf_parents.is_empty() {
            return Err(Error::InvalidTree("tree has no leaves".into()));
        }
        if let Some(&p) = leaf_parents.iter().find(|&&p| p >= n_in) {
            return Err(Error::InvalidTree(format!("leaf parent {p} is not an internal node")));
        }
        let n = n_in + leaf_parents.len();
        let edge_lengths = edge_lengths.unwrap_or_else(|| vec![1.0; n]);
        if edge_lengths.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: edge_lengths.len() });
        }
        if let Some(w) = edge_lengths.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidTree(format!("edge length {w} is not a nonnegative number")));
        }
        if edge_lengths[0] != 1.0 {
            return Err(Error::InvalidTree(format!("root edge length must be 1, got {}", edge_lengths[0])));
        }
        let d1 = parents_to_csr(&internal_parents, n_in);
        let mut d2_rows = vec![Vec::new(); n_in];
        for (leaf, &p) in leaf_parents.iter().enumerate() {
            d2_rows[p].push((leaf, 1.0));
        }
        let d2 = CsrMatrix::from_rows(leaf_parents.len(), d2_rows);
        let embedding = block_inverse_csr(&d1, &d2)?;
        let depths = depths_from_parents(&internal_parents);
        // Each column of C holds the ancestors of one leaf.
        let depth = depths.iter().copied().max().unwrap_or(0);
        assert!(
            embedding.nnz() <= (depth + 1) * leaf_parents.len(),
            "embedding has {} nonzeros, above (d+1)*N_leaf = {}",
            embedding.nnz(),
            (depth + 1) * leaf_parents.len()
        );
        Ok(TreeAdjacency { internal_parents, leaf_parents, edge_lengths, depths, embedding })
    }

    /// Attaches leaves to a fixed internal tree.
    pub fn from_internal(
        internal: &InternalTree,
        leaf_parents: Vec<usize>,
        edge_lengths: Option<Vec<f64>>,
    ) -> Result<Self> {
        TreeAdjacency::from_parents(internal.parents.clone(), leaf_parents, edge_lengths)
    }

    /// Builds from dense binary blocks, rejecting anything that is not a tree.
    pub fn from_blocks(d1: &Array2<f64>, d2: &Array2<f64>, edge_lengths: Option<Vec<f64>>) -> Result<Self> {
        let n_in = d1.nrows();
        if d1.ncols() != n_in {
            return Err(Error::DimensionMismatch { expected: n_in, got: d1.ncols() });
        }
        if d2.nrows() != n_in {
            return Err(Error::DimensionMismatch { expected: n_in, got: d2.nrows() });
        }
        let n_leaf = d2.ncols();
        let mut full = Array2::zeros((n_in + n_leaf, n_in + n_leaf));
        full.slice_mut(ndarray::s![..n_in, ..n_in]).assign(d1);
        full.slice_mut(ndarray::s![..n_in, n_in..]).assign(d2);
        validate_tree(&full).map_err(violations_to_error)?;
        let parent_of = |col: usize| (0..n_in).find(|&r| full[[r, col]] == 1.0);
        let internal = (0..n_in).map(parent_of).collect();
        let leaves = (0..n_leaf).map(|j| parent_of(n_in + j).expect("validated")).collect();
        TreeAdjacency::from_parents(internal, leaves, edge_lengths)
    }

    pub fn n_internal(&self) -> usize {
        self.internal_parents.len()
    }

    pub fn n_leaf(&self) -> usize {
        self.leaf_parents.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_internal() + self.n_leaf()
    }

    pub fn internal_parents(&self) -> &[Option<usize>] {
        &self.internal_parents
    }

    pub fn leaf_parents(&self) -> &[usize] {
        &self.leaf_parents
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_lengths
    }

    pub fn embedding(&self) -> &EmbeddingMatrix {
        &self.embedding
    }

    pub fn internal_tree(&self) -> InternalTree {
        InternalTree { parents: self.internal_parents.clone() }
    }

    /// Depth of the deepest internal node (root has depth 0).
    pub fn internal_depth(&self) -> usize {
        self.depths.iter().copied().max().unwrap_or(0)
    }

    pub fn internal_depths(&self) -> &[usize] {
        &self.depths
    }

    /// Depth of a leaf, counting the leaf edge.
    pub fn leaf_depth(&self, leaf: usize) -> usize {
        self.depths[self.leaf_parents[leaf]] + 1
    }

    pub fn d1(&self) -> Array2<f64> {
        parents_to_csr(&self.internal_parents, self.n_internal()).to_dense()
    }

    pub fn d2(&self) -> Array2<f64> {
        let mut d2 = Array2::zeros((self.n_internal(), self.n_leaf()));
        for (j, &p) in self.leaf_parents.iter().enumerate() {
            d2[[p, j]] = 1.0;
        }
        d2
    }

    /// Full `N x N` adjacency `D_par`.
    pub fn assembled(&self) -> Array2<f64> {
        let n_in = self.n_internal();
        let n = self.n_nodes();
        let mut full = Array2::zeros((n, n));
        for (i, p) in self.internal_parents.iter().enumerate() {
            if let Some(p) = p {
                full[[*p, i]] = 1.0;
            }
        }
        for (j, &p) in self.leaf_parents.iter().enumerate() {
            full[[p, n_in + j]] = 1.0;
        }
        full
    }

    fn parent_of_node(&self, node: usize) -> Option<usize> {
        let n_in = self.n_internal();
        if node < n_in {
            self.internal_parents[node]
        } else {
            Some(self.leaf_parents[node - n_in])
        }
    }

    fn node_depth(&self, node: usize) -> usize {
        let n_in = self.n_internal();
        if node < n_in {
            self.depths[node]
        } else {
            self.depths[self.leaf_parents[node - n_in]] + 1
        }
    }

    /// Length of the tree path between two leaves.
    pub fn leaf_path_length(&self, a: usize, b: usize) -> f64 {
        let n_in = self.n_internal();
        let (mut x, mut y) = (n_in + a, n_in + b);
        let mut len = 0.0;
        while x != y {
            if self.node_depth(x) >= self.node_depth(y) {
                len += self.edge_lengths[x];
                x = self.parent_of_node(x).expect("non-root");
            } else {
                len += self.edge_lengths[y];
                y = self.parent_of_node(y).expect("non-root");
            }
        }
        len
    }

    /// Lowest common ancestor of two leaves, as an internal node index.
    pub fn leaf_lca(&self, a: usize, b: usize) -> usize {
        let (mut x, mut y) = (self.leaf_parents[a], self.leaf_parents[b]);
        while x != y {
            if self.depths[x] >= self.depths[y] {
                x = self.internal_parents[x].expect("non-root");
            } else {
                y = self.internal_parents[y].expect("non-root");
            }
        }
        x
    }
}

/// Column-batched kernel shared by the single and batched distances.
/// `deltas` is `n_leaf x m` row-major; column `k` holds `a_k - b_k`. Each
/// column is accumulated in ascending node order regardless of `m`, so
/// results do not depend on how documents are batched.
fn tw_kernel(tree: &TreeAdjacency, deltas: &[f64], m: usize) -> Vec<f64> {
    let c = tree.embedding.c();
    let w = &tree.edge_lengths;
    let n_in = tree.n_internal();
    let mut totals = vec![0.0; m];
    let mut u = vec![0.0; m];
    for i in 0..n_in {
        u.iter_mut().for_each(|x| *x = 0.0);
        let (idx, val) = c.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            let col = &deltas[j * m..(j + 1) * m];
            for (acc, &d) in u.iter_mut().zip(col) {
                *acc += v * d;
            }
        }
        let wi = w[i];
        for (t, &x) in totals.iter_mut().zip(&u) {
            *t += wi * x.abs();
        }
    }
    for j in 0..tree.n_leaf() {
        let wj = w[n_in + j];
        let col = &deltas[j * m..(j + 1) * m];
        for (t, &d) in totals.iter_mut().zip(col) {
            *t += wj * d.abs();
        }
    }
    totals
}

/// Exact tree-Wasserstein distance
/// `sum_v w_v |a(subtree v) - b(subtree v)|`.
pub fn tree_wasserstein(tree: &TreeAdjacency, a: &Document, b: &Document) -> Result<f64> {
    let n_leaf = tree.n_leaf();
    a.check_dim(n_leaf)?;
    b.check_dim(n_leaf)?;
    let delta = difference(a, b, n_leaf);
    Ok(tw_kernel(tree, &delta, 1)[0])
}

/// References per kernel pass. A tile of `n_leaf x BATCH_TILE` differences
/// stays in cache while each row of `C` is swept once for the whole tile.
const BATCH_TILE: usize = 32;

/// Distances from `query` to every reference, sweeping `C` once per tile of
/// references. Entry `j` is bitwise equal to
/// `tree_wasserstein(tree, query, &refs[j])`.
pub fn batch_distances(tree: &TreeAdjacency, query: &Document, refs: &[Document]) -> Result<Vec<f64>> {
    let n_leaf = tree.n_leaf();
    query.check_dim(n_leaf)?;
    for r in refs {
        r.check_dim(n_leaf)?;
    }
    let mut out = Vec::with_capacity(refs.len());
    let mut deltas = Vec::new();
    // Equal-sized tiles, so no pass runs on a short remainder.
    let tile_len = refs.len().div_ceil(refs.len().div_ceil(BATCH_TILE).max(1)).max(1);
    for tile in refs.chunks(tile_len) {
        let m = tile.len();
        deltas.clear();
        deltas.resize(n_leaf * m, 0.0);
        for k in 0..m {
            for &(p, mass) in query.entries() {
                deltas[p * m + k] = mass;
            }
        }
        for (k, r) in tile.iter().enumerate() {
            for &(p, mass) in r.entries() {
                deltas[p * m + k] -= mass;
            }
        }
        out.extend(tw_kernel(tree, &deltas, m));
    }
    Ok(out)
}

/// [`batch_distances`] over chunks of `chunk` references, chunks evaluated in
/// parallel. Output is identical to the single-batch call.
pub fn par_batch_distances(
    tree: &TreeAdjacency,
    query: &Document,
    refs: &[Document],
    chunk: usize,
) -> Result<Vec<f64>> {
    let chunk = chunk.max(1);
    let parts: Vec<Vec<f64>> =
        refs.par_chunks(chunk).map(|c| batch_distances(tree, query, c)).collect::<Result<_>>()?;
    Ok(parts.concat())
}

/// Tree-Wasserstein distance touching only the ancestor chains of words that
/// occur in either document: `O(s * d)` for `s` distinct words and depth `d`.
pub fn sparse_distance(tree: &TreeAdjacency, a: &Document, b: &Document) -> Result<f64> {
    let n_leaf = tree.n_leaf();
    a.check_dim(n_leaf)?;
    b.check_dim(n_leaf)?;
    let n_in = tree.n_internal();
    let w = &tree.edge_lengths;
    let mut subtree: HashMap<usize, f64> = HashMap::new();
    let mut leaf_total = 0.0;
    let (ea, eb) = (a.entries(), b.entries());
    let (mut i, mut j) = (0, 0);
    while i < ea.len() || j < eb.len() {
        let (pos, delta) = match (ea.get(i), eb.get(j)) {
            (Some(&(pa, ma)), Some(&(pb, mb))) if pa == pb => {
                i += 1;
                j += 1;
                (pa, ma - mb)
            }
            (Some(&(pa, ma)), Some(&(pb, _))) if pa < pb => {
                i += 1;
                (pa, ma)
            }
            (Some(&(pa, ma)), None) => {
                i += 1;
                (pa, ma)
            }
            (_, Some(&(pb, mb))) => {
                j += 1;
                (pb, -mb)
            }
            (None, None) => unreachable!(),
        };
        if delta == 0.0 {
            continue;
        }
        leaf_total += w[n_in + pos] * delta.abs();
        let mut node = Some(tree.leaf_parents[pos]);
        while let Some(v) = node {
            *subtree.entry(v).or_insert(0.0) += delta;
            node = tree.internal_parents[v];
        }
    }
    let mut nodes: Vec<(usize, f64)> = subtree.into_iter().collect();
    nodes.sort_unstable_by_key(|&(v, _)| v);
    let internal: f64 = nodes.iter().map(|&(v, x)| w[v] * x.abs()).sum();
    Ok(internal + leaf_total)
}

const TREE_FORMAT: &str = "stw-tree";
const TREE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CsrPattern {
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
}

/// On-disk tree: binary `D1`/`D2` as CSR sparsity patterns (row = parent,
/// column = child), edge lengths, and the vocabulary hash the tree serves.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TreeFile {
    pub format: String,
    pub version: u32,
    pub n_internal: usize,
    pub n_leaf: usize,
    pub vocab_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builder: Option<serde_json::Value>,
    pub d1: CsrPattern,
    pub d2: CsrPattern,
    pub edge_lengths: Vec<f64>,
}

fn pattern(m: &CsrMatrix) -> CsrPattern {
    CsrPattern { indptr: m.indptr().to_vec(), indices: m.indices().to_vec() }
}

impl TreeFile {
    pub fn new(tree: &TreeAdjacency, vocab_hash: &str, builder: Option<serde_json::Value>) -> Self {
        let d1 = parents_to_csr(&tree.internal_parents, tree.n_internal());
        let d2 = CsrMatrix::from_dense(&tree.d2());
        TreeFile {
            format: TREE_FORMAT.into(),
            version: TREE_VERSION,
            n_internal: tree.n_internal(),
            n_leaf: tree.n_leaf(),
            vocab_hash: vocab_hash.into(),
            builder,
            d1: pattern(&d1),
            d2: pattern(&d2),
            edge_lengths: tree.edge_lengths.clone(),
        }
    }

    pub fn to_tree(&self) -> Result<TreeAdjacency> {
        if self.format != TREE_FORMAT || self.version != TREE_VERSION {
            return Err(Error::Format(format!(
                "expected {TREE_FORMAT} v{TREE_VERSION}, got {} v{}",
                self.format, self.version
            )));
        }
        let internal = pattern_parents(&self.d1, self.n_internal, self.n_internal)?;
        let leaves = pattern_parents(&self.d2, self.n_internal, self.n_leaf)?;
        if internal[0].is_some() {
            return Err(Error::InvalidTree("root has a parent".into()));
        }
        let leaves = leaves
            .into_iter()
            .enumerate()
            .map(|(j, p)| p.ok_or_else(|| Error::InvalidTree(format!("leaf {j} has no parent"))))
            .collect::<Result<Vec<_>>>()?;
        TreeAdjacency::from_parents(internal, leaves, Some(self.edge_lengths.clone()))
    }
}

fn pattern_parents(p: &CsrPattern, rows: usize, cols: usize) -> Result<Vec<Option<usize>>> {
    if p.indptr.len() != rows + 1 || p.indptr.last() != Some(&p.indices.len()) {
        return Err(Error::Format("malformed CSR index pointer".into()));
    }
    let mut parents = vec![None; cols];
    for r in 0..rows {
        let (s, e) = (p.indptr[r], p.indptr[r + 1]);
        if s > e {
            return Err(Error::Format("malformed CSR index pointer".into()));
        }
        for &c in &p.indices[s..e] {
            if c >= cols {
                return Err(Error::Format(format!("column {c} out of range")));
            }
            if parents[c].replace(r).is_some() {
                return Err(Error::InvalidTree(format!("node {c} has two parents")));
            }
        }
    }
    Ok(parents)
}

pub fn save_tree(
    path: impl AsRef<Path>,
    tree: &TreeAdjacency,
    vocab_hash: &str,
    builder: Option<serde_json::Value>,
) -> Result<()> {
    let file = TreeFile::new(tree, vocab_hash, builder);
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

/// Loads a tree, rejecting it unless it was built for `vocab_hash`.
pub fn load_tree(path: impl AsRef<Path>, vocab_hash: &str) -> Result<(TreeAdjacency, TreeFile)> {
    let file: TreeFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if file.vocab_hash != vocab_hash {
        return Err(Error::VocabularyMismatch { expected: file.vocab_hash, got: vocab_hash.into() });
    }
    Ok((file.to_tree()?, file))
}
