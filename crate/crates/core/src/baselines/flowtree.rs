use super::PointCloud;
use crate::error::{Error, Result};
use crate::eval::DistanceProvider;
use crate::measures::Document;
use crate::tree::TreeAdjacency;

/// Sparse coupling `(source word, target word, mass)` plus its ground cost.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowtreePlan {
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

impl FlowtreePlan {
    /// Largest deviation of the plan's marginals from `a` and `b`.
    pub fn marginal_violation(&self, a: &Document, b: &Document, n_leaf: usize) -> f64 {
        let mut row = vec![0.0; n_leaf];
        let mut col = vec![0.0; n_leaf];
        for &(i, j, m) in &self.flows {
            row[i] += m;
            col[j] += m;
        }
        (0..n_leaf).map(|x| (row[x] - a.mass(x)).abs().max((col[x] - b.mass(x)).abs())).fold(0.0, f64::max)
    }
}

/// The tree-optimal plan between `a` and `b`, priced under the Euclidean
/// ground metric. Mass is matched bottom-up: each word first keeps what it
/// can, then every internal node (deepest index first) matches the supply
/// and demand its children pass up, in ascending word order.
pub fn flowtree_plan(cloud: &PointCloud, tree: &TreeAdjacency, a: &Document, b: &Document) -> Result<FlowtreePlan> {
    let n_leaf = tree.n_leaf();
    if cloud.len() != n_leaf {
        return Err(Error::DimensionMismatch { expected: n_leaf, got: cloud.len() });
    }
    a.check_dim(n_leaf)?;
    b.check_dim(n_leaf)?;
    let n_in = tree.n_internal();
    let mut supply: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_in];
    let mut demand: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_in];
    let mut flows = Vec::new();
    for x in 0..n_leaf {
        let (ma, mb) = (a.mass(x), b.mass(x));
        let kept = ma.min(mb);
        if kept > 0.0 {
            flows.push((x, x, kept));
        }
        let p = tree.leaf_parents()[x];
        if ma > mb {
            supply[p].push((x, ma - mb));
        } else if mb > ma {
            demand[p].push((x, mb - ma));
        }
    }
    for v in (0..n_in).rev() {
        let mut s = std::mem::take(&mut supply[v]);
        let mut d = std::mem::take(&mut demand[v]);
        s.sort_by_key(|e| e.0);
        d.sort_by_key(|e| e.0);
        let (mut i, mut j) = (0, 0);
        while i < s.len() && j < d.len() {
            let m = s[i].1.min(d[j].1);
            flows.push((s[i].0, d[j].0, m));
            s[i].1 -= m;
            d[j].1 -= m;
            if s[i].1 <= 0.0 {
                i += 1;
            }
            if d[j].1 <= 0.0 {
                j += 1;
            }
        }
        // Whatever remains at the root is rounding residue.
        if let Some(p) = tree.internal_parents()[v] {
            supply[p].extend(s.drain(i..));
            demand[p].extend(d.drain(j..));
        }
    }
    flows.sort_by_key(|f| (f.0, f.1));
    let cost = flows.iter().map(|&(i, j, m)| m * cloud.distance(i, j)).sum();
    Ok(FlowtreePlan { flows, cost })
}

/// Ground cost of the tree-optimal plan; an upper bound on exact OT.
pub fn flowtree_distance(cloud: &PointCloud, tree: &TreeAdjacency, a: &Document, b: &Document) -> Result<f64> {
    Ok(flowtree_plan(cloud, tree, a, b)?.cost)
}

pub struct FlowtreeProvider {
    cloud: PointCloud,
    tree: TreeAdjacency,
}

impl FlowtreeProvider {
    pub fn new(cloud: PointCloud, tree: TreeAdjacency) -> Result<Self> {
        if cloud.len() != tree.n_leaf() {
            return Err(Error::DimensionMismatch { expected: tree.n_leaf(), got: cloud.len() });
        }
        Ok(FlowtreeProvider { cloud, tree })
    }
}

impl DistanceProvider for FlowtreeProvider {
    fn id(&self) -> &str {
        "flowtree"
    }

    fn distance(&self, a: &Document, b: &Document) -> Result<f64> {
        flowtree_distance(&self.cloud, &self.tree, a, b)
    }
}
