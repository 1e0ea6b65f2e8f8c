//! Exact and entropic optimal transport between small discrete measures.
//!
//! These solvers are ground truth for the tree kernels and stand in for the
//! word mover's distance on desk-sized instances.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Largest `rows * cols` accepted by [`exact_ot`].
pub const EXACT_OT_CELL_LIMIT: usize = 10_000;
const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub coupling: Array2<f64>,
    pub cost: f64,
}

impl TransportPlan {
    /// Largest absolute deviation of the plan's row/column sums from `a`/`b`.
    pub fn marginal_violation(&self, a: &[f64], b: &[f64]) -> f64 {
        let rows = self.coupling.sum_axis(ndarray::Axis(1));
        let cols = self.coupling.sum_axis(ndarray::Axis(0));
        let r = rows.iter().zip(a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let c = cols.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        r.max(c)
    }
}

fn to_simplex(v: &[f64], name: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InfeasibleInput(format!("{name} is empty")));
    }
    if let Some(x) = v.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(Error::InfeasibleInput(format!("{name} has entry {x}")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InfeasibleInput(format!("{name} sums to {sum}")));
    }
    Ok(v.iter().map(|x| x / sum).collect())
}

fn check_cost(a: &[f64], b: &[f64], cost: &Array2<f64>) -> Result<()> {
    if cost.dim() != (a.len(), b.len()) {
        return Err(Error::DimensionMismatch { expected: a.len() * b.len(), got: cost.len() });
    }
    if let Some(c) = cost.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
        return Err(Error::InfeasibleInput(format!("cost entry {c} is not a nonnegative number")));
    }
    Ok(())
}

fn plan_cost(coupling: &Array2<f64>, cost: &Array2<f64>) -> f64 {
    coupling.iter().zip(cost.iter()).map(|(t, c)| t * c).sum()
}

/// Exact optimal transport by successive shortest augmenting paths with
/// Dijkstra on reduced costs. Every augmentation drives one supply, demand or
/// reverse flow exactly to zero, so the loop is finite and the result is a
/// vertex of the transport polytope.
pub fn exact_ot(a: &[f64], b: &[f64], cost: &Array2<f64>) -> Result<TransportPlan> {
    let (n, m) = (a.len(), b.len());
    if n * m > EXACT_OT_CELL_LIMIT {
        return Err(Error::SizeLimit { rows: n, cols: m, limit: EXACT_OT_CELL_LIMIT });
    }
    let a = to_simplex(a, "source")?;
    let b = to_simplex(b, "target")?;
    check_cost(&a, &b, cost)?;

    // Node layout: 0 = source, 1..=n supplies, n+1..=n+m demands, n+m+1 = sink.
    let sink = n + m + 1;
    let nodes = n + m + 2;
    let mut rem_a = a.clone();
    let mut rem_b = b.clone();
    let mut flow = Array2::<f64>::zeros((n, m));
    let mut potential = vec![0.0; nodes];
    let max_rounds = 4 * (n + m) * (n + m) + 16;

    for _ in 0..max_rounds {
        if rem_a.iter().all(|&x| x == 0.0) || rem_b.iter().all(|&x| x == 0.0) {
            break;
        }
        // Dense Dijkstra from the source.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        let mut done = vec![false; nodes];
        dist[0] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            let relax = |v: usize, arc_cost: f64, dist: &mut Vec<f64>, prev: &mut Vec<usize>| {
                let reduced = (arc_cost + potential[u] - potential[v]).max(0.0);
                let cand = dist[u] + reduced;
                if cand < dist[v] {
                    dist[v] = cand;
                    prev[v] = u;
                }
            };
            if u == 0 {
                for i in 0..n {
                    if rem_a[i] > 0.0 {
                        relax(1 + i, 0.0, &mut dist, &mut prev);
                    }
                }
            } else if u <= n {
                let i = u - 1;
                for j in 0..m {
                    relax(n + 1 + j, cost[[i, j]], &mut dist, &mut prev);
                }
            } else if u < sink {
                let j = u - n - 1;
                for i in 0..n {
                    if flow[[i, j]] > 0.0 {
                        relax(1 + i, -cost[[i, j]], &mut dist, &mut prev);
                    }
                }
                if rem_b[j] > 0.0 {
                    relax(sink, 0.0, &mut dist, &mut prev);
                }
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        for v in 0..nodes {
            potential[v] += dist[v].min(dist[sink]);
        }
        // Walk back from the sink to find the bottleneck.
        let mut path = vec![sink];
        let mut v = sink;
        while v != 0 {
            v = prev[v];
            path.push(v);
        }
        path.reverse();
        let mut bottleneck = f64::INFINITY;
        for w in path.windows(2) {
            let (u, v) = (w[0], w[1]);
            let cap = if u == 0 {
                rem_a[v - 1]
            } else if v == sink {
                rem_b[u - n - 1]
            } else if u <= n {
                f64::INFINITY
            } else {
                flow[[v - 1, u - n - 1]]
            };
            bottleneck = bottleneck.min(cap);
        }
        for w in path.windows(2) {
            let (u, v) = (w[0], w[1]);
            if u == 0 {
                rem_a[v - 1] = sub_exact(rem_a[v - 1], bottleneck);
            } else if v == sink {
                rem_b[u - n - 1] = sub_exact(rem_b[u - n - 1], bottleneck);
            } else if u <= n {
                flow[[u - 1, v - n - 1]] += bottleneck;
            } else {
                let f = &mut flow[[v - 1, u - n - 1]];
                *f = sub_exact(*f, bottleneck);
            }
        }
    }
    let cost_value = plan_cost(&flow, cost);
    Ok(TransportPlan { coupling: flow, cost: cost_value })
}

/// `x - y`, snapped to zero when the difference is at rounding level.
fn sub_exact(x: f64, y: f64) -> f64 {
    let d = x - y;
    if d <= 4.0 * f64::EPSILON * x.abs() {
        0.0
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornResult {
    /// Feasible plan after rounding onto the transport polytope.
    pub plan: TransportPlan,
    /// Whether the scaling iterations met `tol` before `max_iter`.
    pub converged: bool,
    pub iterations: usize,
    /// L1 marginal violation of the last scaling iterate, before rounding.
    pub marginal_error: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Entropic optimal transport with log-domain Sinkhorn iterations, stopped
/// once the row marginal L1 error drops below `tol`. The final plan is
/// rounded onto `U(a, b)` so its cost upper-bounds the exact optimum.
/// Non-convergence is reported through `converged = false` with the best
/// (last) iterate.
pub fn sinkhorn(
    a: &[f64],
    b: &[f64],
    cost: &Array2<f64>,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornResult> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    let a = to_simplex(a, "source")?;
    let b = to_simplex(b, "target")?;
    check_cost(&a, &b, cost)?;
    let (n, m) = (a.len(), b.len());
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut converged = false;
    let mut iterations = 0;
    let mut marginal_error = f64::INFINITY;

    let plan_of = |f: &[f64], g: &[f64]| {
        Array2::from_shape_fn((n, m), |(i, j)| {
            if a[i] == 0.0 || b[j] == 0.0 {
                0.0
            } else {
                ((f[i] + g[j] - cost[[i, j]]) / epsilon).exp()
            }
        })
    };

    while iterations < max_iter {
        iterations += 1;
        for i in 0..n {
            f[i] = if a[i] == 0.0 {
                0.0
            } else {
                let lse = log_sum_exp((0..m).filter(|&j| b[j] > 0.0).map(|j| (g[j] - cost[[i, j]]) / epsilon));
                epsilon * (log_a[i] - lse)
            };
        }
        for j in 0..m {
            g[j] = if b[j] == 0.0 {
                0.0
            } else {
                let lse = log_sum_exp((0..n).filter(|&i| a[i] > 0.0).map(|i| (f[i] - cost[[i, j]]) / epsilon));
                epsilon * (log_b[j] - lse)
            };
        }
        if iterations % 10 == 0 || iterations == max_iter {
            let t = plan_of(&f, &g);
            let rows = t.sum_axis(ndarray::Axis(1));
            marginal_error = rows.iter().zip(&a).map(|(r, x)| (r - x).abs()).sum();
            if marginal_error < tol {
                converged = true;
                break;
            }
        }
    }
    let coupling = round_to_polytope(plan_of(&f, &g), &a, &b);
    let cost_value = plan_cost(&coupling, cost);
    Ok(SinkhornResult { plan: TransportPlan { coupling, cost: cost_value }, converged, iterations, marginal_error })
}

/// Projects a nonnegative matrix onto the transport polytope by scaling down
/// over-full rows and columns and redistributing the deficit as a rank-one
/// correction.
fn round_to_polytope(mut t: Array2<f64>, a: &[f64], b: &[f64]) -> Array2<f64> {
    let (n, m) = t.dim();
    for i in 0..n {
        let r: f64 = t.row(i).sum();
        if r > a[i] && r > 0.0 {
            let s = a[i] / r;
            t.row_mut(i).mapv_inplace(|x| x * s);
        }
    }
    for j in 0..m {
        let c: f64 = t.column(j).sum();
        if c > b[j] && c > 0.0 {
            let s = b[j] / c;
            t.column_mut(j).mapv_inplace(|x| x * s);
        }
    }
    let err_r: Vec<f64> = (0..n).map(|i| (a[i] - t.row(i).sum()).max(0.0)).collect();
    let err_c: Vec<f64> = (0..m).map(|j| (b[j] - t.column(j).sum()).max(0.0)).collect();
    let total: f64 = err_c.iter().sum();
    if total > 0.0 {
        for i in 0..n {
            for j in 0..m {
                t[[i, j]] += err_r[i] * err_c[j] / total;
            }
        }
    }
    t
}
