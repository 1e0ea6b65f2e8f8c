mod common;

use common::oracle::{dense_inverse, soft_distance_dense, to_na, transport_by_enumeration};
use common::{random_document, random_document_upto, random_internal_tree, random_points, random_tree, rng};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use stw_core::baselines::{flowtree_plan, quadtree_build, PointCloud, QuadtreeConfig};
use stw_core::data_io::synthetic_instruments;
use stw_core::ot::{exact_ot, sinkhorn};
use stw_core::stw::{harden, smooth_abs, soft_tree_wasserstein, SoftTreeModel};
use stw_core::tree::{perfect_kary_internal, sparse_distance, subtree_matrix, tree_wasserstein, TreeAdjacency};
use stw_core::Document;

fn path_costs(tree: &TreeAdjacency) -> Array2<f64> {
    let n = tree.n_leaf();
    Array2::from_shape_fn((n, n), |(i, j)| tree.leaf_path_length(i, j))
}

#[test]
fn block_inverse_matches_dense_inverse() {
    let mut r = rng(21);
    for _ in 0..30 {
        let n = r.gen_range(2..=40);
        let t = random_tree(&mut r, n, false);
        let got = to_na(&t.embedding().assemble());
        let want = dense_inverse(&t.assembled());
        assert!((got - want).amax() <= 1e-12);
    }
}

#[test]
fn subtree_matrix_is_truncated_power_sum() {
    let mut r = rng(22);
    for _ in 0..20 {
        let n = r.gen_range(2..=25);
        let t = random_tree(&mut r, n, false);
        let d = to_na(&t.assembled());
        let mut sum = DMatrix::identity(n, n);
        let mut power = DMatrix::identity(n, n);
        for _ in 1..n {
            power = &power * &d;
            sum += &power;
        }
        assert_eq!(to_na(&subtree_matrix(&t.assembled()).unwrap()), sum);
    }
}

#[test]
fn five_ary_leaf_on_third_node() {
    let internal = perfect_kary_internal(5, 1).unwrap();
    assert_eq!(internal.len(), 6);
    let t = TreeAdjacency::from_internal(&internal, vec![2, 0], None).unwrap();
    let full = dense_inverse(&t.assembled());
    let col: Vec<f64> = (0..6).map(|i| full[(i, 6)]).collect();
    assert_eq!(col, vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let c = t.embedding().c();
    assert_eq!((0..6).map(|i| c.get(i, 0)).collect::<Vec<_>>(), col);
    assert_eq!(perfect_kary_internal(5, 5).unwrap().len(), 3906);
}

#[test]
fn relaxed_inverse_keeps_structural_invariants() {
    let mut r = rng(23);
    for _ in 0..20 {
        let n_in = r.gen_range(1..=8);
        let n_leaf = r.gen_range(1..=10);
        let theta = Array2::from_shape_simple_fn((n_in, n_leaf), || r.gen_range(-3.0..3.0));
        let model = SoftTreeModel::from_logits(random_internal_tree(&mut r, n_in), theta, 1.0).unwrap();
        let inv = dense_inverse(&model.assembled());
        let n = n_in + n_leaf;
        for j in 0..n {
            assert!((inv[(0, j)] - 1.0).abs() <= 1e-10);
            assert!((inv[(j, j)] - 1.0).abs() <= 1e-10);
        }
        let p = model.subtree_probabilities(&model.d2());
        for i in 0..n_in {
            for x in 0..n_leaf {
                assert!((p[[i, x]] - inv[(i, n_in + x)]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn tree_distance_is_transport_on_tree_paths() {
    let mut r = rng(24);
    for _ in 0..60 {
        let n = r.gen_range(2..=15);
        let weighted = r.gen_bool(0.5);
        let t = random_tree(&mut r, n, weighted);
        let n_leaf = t.n_leaf();
        let a = random_document_upto(&mut r, n_leaf, n_leaf);
        let b = random_document_upto(&mut r, n_leaf, n_leaf);
        let ot = exact_ot(&a.dense(n_leaf), &b.dense(n_leaf), &path_costs(&t)).unwrap().cost;
        assert!((tree_wasserstein(&t, &a, &b).unwrap() - ot).abs() <= 1e-8);
    }
}

#[test]
fn sparse_distance_matches_dense_path() {
    let mut r = rng(25);
    for _ in 0..100 {
        let n = r.gen_range(2..=60);
        let t = random_tree(&mut r, n, true);
        let n_leaf = t.n_leaf();
        let a = random_document_upto(&mut r, n_leaf, n_leaf.min(6));
        let b = random_document_upto(&mut r, n_leaf, n_leaf.min(6));
        assert!((sparse_distance(&t, &a, &b).unwrap() - tree_wasserstein(&t, &a, &b).unwrap()).abs() <= 1e-12);
        assert_eq!(sparse_distance(&t, &a, &a).unwrap(), 0.0);
    }
}

#[test]
fn disjoint_words_cost_their_paths_below_the_lca() {
    let mut r = rng(26);
    for _ in 0..50 {
        let n = r.gen_range(3..=30);
        let t = random_tree(&mut r, n, true);
        if t.n_leaf() < 2 {
            continue;
        }
        let (x, y) = (0, t.n_leaf() - 1);
        let (a, b) = (Document::dirac(x, None), Document::dirac(y, None));
        let path = t.leaf_path_length(x, y);
        assert!((sparse_distance(&t, &a, &b).unwrap() - path).abs() <= 1e-12);
        assert!((tree_wasserstein(&t, &a, &b).unwrap() - path).abs() <= 1e-12);
    }
}

#[test]
fn hard_tree_distance_is_a_metric() {
    let mut r = rng(27);
    for _ in 0..100 {
        let n = r.gen_range(3..=30);
        let t = random_tree(&mut r, n, true);
        let k = t.n_leaf();
        let docs: Vec<Document> = (0..3).map(|_| random_document_upto(&mut r, k, k)).collect();
        let d = |i: usize, j: usize| tree_wasserstein(&t, &docs[i], &docs[j]).unwrap();
        assert!(d(0, 1) >= 0.0);
        assert!((d(0, 1) - d(1, 0)).abs() <= 1e-15);
        assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
    }
}

#[test]
fn soft_distance_matches_dense_relaxed_oracle() {
    let mut r = rng(28);
    for _ in 0..40 {
        let n_in = r.gen_range(1..=6);
        let n_leaf = r.gen_range(1..=10);
        let theta = Array2::from_shape_simple_fn((n_in, n_leaf), || r.gen_range(-2.0..2.0));
        let model = SoftTreeModel::from_logits(random_internal_tree(&mut r, n_in), theta, 2.0).unwrap();
        let a = random_document_upto(&mut r, n_leaf, n_leaf);
        let b = random_document_upto(&mut r, n_leaf, n_leaf);
        let got = soft_tree_wasserstein(&model, &a, &b).unwrap();
        assert!((got - soft_distance_dense(&model, &a, &b)).abs() <= 1e-12);
        assert_eq!(got, soft_tree_wasserstein(&model, &b, &a).unwrap());
        assert_eq!(soft_tree_wasserstein(&model, &a, &a).unwrap(), 0.0);
    }
}

#[test]
fn soft_distance_breaks_the_triangle_inequality() {
    // Near zero the smooth absolute value is quadratic, so a midpoint is
    // closer to both ends than half their distance.
    let internal = perfect_kary_internal(2, 1).unwrap();
    let model = SoftTreeModel::initialize(internal, 2, 0.5, 0).unwrap();
    let a = Document::dirac(0, None);
    let b = Document::dirac(1, None);
    let mid = Document::new(vec![(0, 0.5), (1, 0.5)], None, 2).unwrap();
    let d = |x: &Document, y: &Document| soft_tree_wasserstein(&model, x, y).unwrap();
    assert!(d(&a, &b) > d(&a, &mid) + d(&mid, &b));
}

#[test]
fn soft_distance_approaches_hardened_tree() {
    let mut r = rng(29);
    for _ in 0..20 {
        let n_in = r.gen_range(2..=8);
        let n_leaf = r.gen_range(2..=10);
        let mut theta = Array2::zeros((n_in, n_leaf));
        for x in 0..n_leaf {
            theta[[r.gen_range(0..n_in), x]] = 60.0;
        }
        let model = SoftTreeModel::from_logits(random_internal_tree(&mut r, n_in), theta, 1.0).unwrap();
        let hard = harden(&model);
        let a = random_document_upto(&mut r, n_leaf, n_leaf);
        let b = random_document_upto(&mut r, n_leaf, n_leaf);
        let target = tree_wasserstein(&hard, &a, &b).unwrap();
        let gaps: Vec<f64> = [1.0, 10.0, 100.0, 1e4]
            .iter()
            .map(|&alpha| {
                (soft_tree_wasserstein(&model.clone().with_alpha(alpha), &a, &b).unwrap() - target).abs() / target
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0]), "{gaps:?}");
        assert!(gaps[3] < 1e-3, "{gaps:?}");
    }
}

#[test]
fn smooth_abs_reference_values() {
    assert_eq!(smooth_abs(0.0, 3.0), 0.0);
    assert!((smooth_abs(1.0, 50.0) - 1.0).abs() <= 1e-10);
    assert!((smooth_abs(-2.0, 1.0) - 1.5232).abs() <= 1e-4);
    let direct = |x: f64, a: f64| x * ((a * x).exp() - (-a * x).exp()) / (2.0 + (a * x).exp() + (-a * x).exp());
    for &(x, a) in &[(-2.0, 1.0), (0.3, 2.0), (1.7, 0.5), (-0.01, 10.0)] {
        assert!((smooth_abs(x, a) - direct(x, a)).abs() <= 1e-14);
    }
    assert_eq!(smooth_abs(3.0, 1e6), 3.0);
    assert_eq!(smooth_abs(-1e3, 1e6), 1e3);
}

#[test]
fn exact_transport_matches_vertex_enumeration() {
    let mut r = rng(30);
    for _ in 0..15 {
        let (n, m) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let a = random_document(&mut r, n, n, None).dense(n);
        let b = random_document(&mut r, m, m, None).dense(m);
        let cost = Array2::from_shape_simple_fn((n, m), || r.gen_range(0.0..1.0));
        let plan = exact_ot(&a, &b, &cost).unwrap();
        assert!((plan.cost - transport_by_enumeration(&a, &b, &cost)).abs() <= 1e-10);
        assert!(plan.marginal_violation(&a, &b) <= 1e-12);
    }
}

#[test]
fn sinkhorn_limits() {
    let mut r = rng(31);
    for _ in 0..5 {
        let a = random_document(&mut r, 5, 5, None).dense(5);
        let b = random_document(&mut r, 5, 5, None).dense(5);
        let cost = Array2::from_shape_simple_fn((5, 5), || r.gen_range(0.1..1.0));
        let exact = exact_ot(&a, &b, &cost).unwrap().cost;
        let sharp = sinkhorn(&a, &b, &cost, 1e-3, 100_000, 1e-12).unwrap();
        assert!(sharp.plan.cost >= exact - 1e-12);
        assert!(sharp.plan.cost <= exact * 1.01);
        let flat = sinkhorn(&a, &b, &cost, 1e4, 10_000, 1e-12).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((flat.plan.coupling[[i, j]] - a[i] * b[j]).abs() <= 1e-4);
            }
        }
    }
}

#[test]
fn flowtree_bounds_exact_transport() {
    let mut r = rng(32);
    for _ in 0..40 {
        let n = r.gen_range(2..=20);
        let dim = r.gen_range(1..=4);
        let cloud = PointCloud::new(random_points(&mut r, n, dim)).unwrap();
        let seed = r.gen();
        let q = quadtree_build(&cloud, &QuadtreeConfig { seed, ..Default::default() }).unwrap();
        let a = random_document_upto(&mut r, n, n.min(8));
        let b = random_document_upto(&mut r, n, n.min(8));
        let all: Vec<usize> = (0..n).collect();
        let exact = exact_ot(&a.dense(n), &b.dense(n), &cloud.cost_matrix(&all, &all)).unwrap().cost;
        let plan = flowtree_plan(&cloud, &q.tree, &a, &b).unwrap();
        assert!(plan.cost >= exact - 1e-9);
        assert!(plan.marginal_violation(&a, &b, n) <= 1e-9);
        // Any feasible plan priced by the oracle costs what Flowtree reports.
        let priced: f64 = plan.flows.iter().map(|&(i, j, m)| m * cloud.distance(i, j)).sum();
        assert!((priced - plan.cost).abs() <= 1e-12);
    }
}

#[test]
fn quadtree_distance_is_a_metric() {
    let mut r = rng(33);
    let cloud = PointCloud::new(random_points(&mut r, 25, 3)).unwrap();
    let t = quadtree_build(&cloud, &QuadtreeConfig::default()).unwrap().tree;
    for _ in 0..50 {
        let docs: Vec<Document> = (0..3).map(|_| random_document_upto(&mut r, 25, 5)).collect();
        let d = |i: usize, j: usize| tree_wasserstein(&t, &docs[i], &docs[j]).unwrap();
        assert!((d(0, 1) - d(1, 0)).abs() <= 1e-15);
        assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
    }
}

#[test]
fn synthetic_classes_are_balanced() {
    let c = synthetic_instruments(10_000, 0, 4);
    let ones = c.documents.iter().filter(|d| d.label() == Some(1)).count() as f64;
    // Five standard deviations of a fair binomial.
    assert!((ones - 5000.0).abs() < 5.0 * 50.0, "{ones}");
}
