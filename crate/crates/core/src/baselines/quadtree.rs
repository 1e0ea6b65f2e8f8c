use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};
use crate::tree::TreeAdjacency;

pub const DEFAULT_MAX_DEPTH: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadtreeConfig {
    pub seed: u64,
    /// Cells at this depth stop splitting; their points attach directly.
    pub max_depth: usize,
    /// Give words with identical embeddings one shared point node. When
    /// false such words are an error.
    pub merge_duplicates: bool,
}

impl Default for QuadtreeConfig {
    fn default() -> Self {
        QuadtreeConfig { seed: 0, max_depth: DEFAULT_MAX_DEPTH, merge_duplicates: true }
    }
}

/// A built quadtree and what happened along the way.
#[derive(Debug, Clone)]
pub struct Quadtree {
    pub tree: TreeAdjacency,
    /// Groups of words (ascending) that share one embedding point.
    pub aliases: Vec<Vec<usize>>,
    /// Number of distinct points left unseparated at the depth cap.
    pub capped_points: usize,
}

/// Randomly shifted quadtree. The enclosing cube has side twice the largest
/// coordinate range; its lower corner is offset below the data minimum by a
/// uniform fraction of that range per dimension.
pub fn quadtree_build(cloud: &PointCloud, cfg: &QuadtreeConfig) -> Result<Quadtree> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let offset: Vec<f64> = (0..cloud.dim()).map(|_| rng.gen_range(0.0..1.0)).collect();
    quadtree_build_with_offset(cloud, &offset, cfg)
}

/// Quadtree with an explicit shift, `offset[d]` in `[0, 1)`.
///
/// A node's edge length is the side of its own cell. A word's leaf edge is
/// half the side of the cell it ends in, the side its next split would have
/// had. Words sharing a point hang below one extra point node (edge half the
/// cell side) with zero-length leaf edges, so they sit at distance zero.
pub fn quadtree_build_with_offset(cloud: &PointCloud, offset: &[f64], cfg: &QuadtreeConfig) -> Result<Quadtree> {
    let dim = cloud.dim();
    if offset.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: offset.len() });
    }
    if let Some(u) = offset.iter().find(|u| !(**u >= 0.0 && **u < 1.0)) {
        return Err(Error::InvalidConfig(format!("quadtree offset {u} outside [0, 1)")));
    }
    let groups = duplicate_groups(cloud);
    if !cfg.merge_duplicates {
        if let Some(g) = groups.iter().find(|g| g.len() > 1) {
            return Err(Error::DuplicatePoints(g[0], g[1]));
        }
    }
    let pts = cloud.points();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for row in pts.rows() {
        for (d, &x) in row.iter().enumerate() {
            lo[d] = lo[d].min(x);
            hi[d] = hi[d].max(x);
        }
    }
    let mut extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    if extent == 0.0 {
        extent = 1.0;
    }
    let origin: Vec<f64> = lo.iter().zip(offset).map(|(l, u)| l - u * extent).collect();

    let n_leaf = cloud.len();
    let mut internal_parents: Vec<Option<usize>> = vec![None];
    let mut internal_w: Vec<f64> = vec![1.0];
    let mut leaf_parent = vec![0usize; n_leaf];
    let mut leaf_w = vec![0.0; n_leaf];
    let mut capped_points = 0;

    struct Cell {
        node: usize,
        lo: Vec<f64>,
        side: f64,
        depth: usize,
        members: Vec<usize>,
    }
    let mut queue = VecDeque::new();
    queue.push_back(Cell { node: 0, lo: origin, side: 2.0 * extent, depth: 0, members: (0..groups.len()).collect() });

    let new_node = |parent: usize, w: f64, parents: &mut Vec<Option<usize>>, ws: &mut Vec<f64>| {
        parents.push(Some(parent));
        ws.push(w);
        parents.len() - 1
    };

    while let Some(cell) = queue.pop_front() {
        let half = cell.side / 2.0;
        if cell.members.len() == 1 || cell.depth >= cfg.max_depth {
            if cell.members.len() > 1 {
                capped_points += cell.members.len();
            }
            for &g in &cell.members {
                let words = &groups[g];
                if words.len() == 1 {
                    leaf_parent[words[0]] = cell.node;
                    leaf_w[words[0]] = half;
                } else {
                    let p = new_node(cell.node, half, &mut internal_parents, &mut internal_w);
                    for &x in words {
                        leaf_parent[x] = p;
                        leaf_w[x] = 0.0;
                    }
                }
            }
            continue;
        }
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut children: Vec<(Vec<u64>, Vec<usize>)> = Vec::new();
        for &g in &cell.members {
            let p = pts.row(groups[g][0]);
            let mut key = vec![0u64; dim.div_ceil(64)];
            for d in 0..dim {
                if p[d] >= cell.lo[d] + half {
                    key[d / 64] |= 1 << (d % 64);
                }
            }
            match index.get(&key) {
                Some(&c) => children[c].1.push(g),
                None => {
                    index.insert(key.clone(), children.len());
                    children.push((key, vec![g]));
                }
            }
        }
        for (key, members) in children {
            let node = new_node(cell.node, half, &mut internal_parents, &mut internal_w);
            let lo = (0..dim)
                .map(|d| if key[d / 64] >> (d % 64) & 1 == 1 { cell.lo[d] + half } else { cell.lo[d] })
                .collect();
            queue.push_back(Cell { node, lo, side: half, depth: cell.depth + 1, members });
        }
    }
    let mut w = internal_w;
    w.extend(leaf_w);
    let tree = TreeAdjacency::from_parents(internal_parents, leaf_parent, Some(w))?;
    let aliases = groups.into_iter().filter(|g| g.len() > 1).collect();
    Ok(Quadtree { tree, aliases, capped_points })
}

/// Words grouped by identical embedding; groups ordered by smallest word.
fn duplicate_groups(cloud: &PointCloud) -> Vec<Vec<usize>> {
    let pts = cloud.points();
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    let cmp = |a: &usize, b: &usize| {
        pts.row(*a)
            .iter()
            .zip(pts.row(*b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    order.sort_by(|a, b| cmp(a, b).then(a.cmp(b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if pts.row(g[0]) == pts.row(i) => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups.sort_by_key(|g| g[0]);
    groups
}
