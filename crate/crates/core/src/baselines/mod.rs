//! Unsupervised tree metrics over word embeddings.

mod flowtree;
mod quadtree;
mod tsw;

pub use flowtree::{flowtree_distance, flowtree_plan, FlowtreePlan, FlowtreeProvider};
pub use quadtree::{quadtree_build, quadtree_build_with_offset, Quadtree, QuadtreeConfig, DEFAULT_MAX_DEPTH};
pub use tsw::{load_tree_set, save_tree_set, tsw_distance, tsw_sample, SampledTreeSet, TswConfig, TswProvider};

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// One embedding vector per vocabulary word, row `i` for word `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Array2<f64>,
}

impl PointCloud {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::EmptySet("point cloud"));
        }
        if points.ncols() == 0 {
            return Err(Error::InvalidConfig("embedding dimension is zero".into()));
        }
        if let Some(((i, _), _)) = points.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("embedding of word {i} is not finite")));
        }
        Ok(PointCloud { points })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    /// Euclidean ground cost between words `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    /// Ground cost matrix between two lists of words.
    pub fn cost_matrix(&self, rows: &[usize], cols: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), cols.len()), |(r, c)| self.distance(rows[r], cols[c]))
    }
}

pub(crate) fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
