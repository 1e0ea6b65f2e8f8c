use stw_core::data_io::synthetic_instruments;
use stw_core::eval::{knn_error, TreeProvider};
use stw_core::measures::SplitPart;
use stw_core::stw::{harden, select_margin, train, TrainConfig};
use stw_core::tree::validate_tree;
use stw_core::Error;

fn shallow(seed: u64) -> TrainConfig {
    TrainConfig { seed, depth: 1, ..TrainConfig::default() }
}

#[test]
fn small_margins_tie_at_zero_and_the_smaller_wins() {
    let corpus = synthetic_instruments(100, 100, 0);
    let cfg = TrainConfig { margin_grid: vec![0.1, 1.0], ..shallow(0) };
    let chosen = select_margin(&corpus, &cfg).unwrap();
    assert_eq!(chosen.candidates, vec![(0.1, 0.0), (1.0, 0.0)]);
    assert_eq!(chosen.margin, 0.1);
}

#[test]
fn empty_margin_grid_is_rejected() {
    let corpus = synthetic_instruments(20, 10, 0);
    let cfg = TrainConfig { margin_grid: vec![], ..shallow(0) };
    assert!(matches!(select_margin(&corpus, &cfg), Err(Error::InvalidConfig(_))));
}

#[test]
fn training_is_deterministic_per_seed() {
    let corpus = synthetic_instruments(60, 20, 4);
    let cfg = TrainConfig { epochs: 5, margin: 20.0, ..shallow(4) };
    let a = train(&corpus, &cfg).unwrap();
    let b = train(&corpus, &cfg).unwrap();
    assert_eq!(a.model.theta(), b.model.theta());
    assert_eq!(a.best_epoch, b.best_epoch);
    let other = train(&corpus, &TrainConfig { seed: 5, ..cfg }).unwrap();
    assert_ne!(a.model.theta(), other.model.theta());
}

#[test]
fn best_snapshot_has_lowest_validation_loss() {
    let corpus = synthetic_instruments(80, 20, 1);
    let out = train(&corpus, &TrainConfig { epochs: 12, margin: 20.0, ..shallow(1) }).unwrap();
    assert_eq!(out.log.len(), 12);
    let best = out.log.iter().map(|r| r.valid_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(out.best_valid_loss, best);
    assert_eq!(out.log[out.best_epoch - 1].valid_loss, best);
}

#[test]
fn hardened_default_depth_tree_separates_classes() {
    let corpus = synthetic_instruments(100, 100, 2);
    let out = train(&corpus, &TrainConfig { margin: 20.0, seed: 2, ..TrainConfig::default() }).unwrap();
    let tree = harden(&out.model);
    assert!(validate_tree(&tree.assembled()).is_ok());
    let provider = TreeProvider::new("stw", tree);
    assert_eq!(knn_error(&provider, &corpus, SplitPart::Train, SplitPart::Test, 1).unwrap(), 0.0);
}
