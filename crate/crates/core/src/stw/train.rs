use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::loss::{contrastive_loss, loss_and_gradient, PairBatch};
use super::model::{harden, SoftTreeModel};
use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::eval::{knn_error, TreeProvider};
use crate::measures::{LabeledCorpus, SplitPart};
use crate::tree::perfect_kary_internal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Multiplier applied to document masses inside the loss.
    pub mass_scale: f64,
    /// Sharpness of the smooth absolute value.
    pub alpha: f64,
    pub seed: u64,
    /// Share of the training split held out when the corpus has no
    /// validation split.
    pub validation_fraction: f64,
    /// Candidate margins. With unit edge lengths every pair's distance is at
    /// least the scaled L1 gap between the documents (up to
    /// `2 * mass_scale`), so a margin below that clamps every negative pair.
    pub margin_grid: Vec<f64>,
    /// Branching factor of the fixed internal tree.
    pub branching: usize,
    /// Depth of the fixed internal tree.
    pub depth: usize,
    /// `k` of the kNN rule used to score margins.
    pub selection_k: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 1.0,
            learning_rate: 0.1,
            batch_size: 100,
            epochs: 30,
            mass_scale: 5.0,
            alpha: 20.0,
            seed: 0,
            validation_fraction: 0.2,
            margin_grid: vec![10.0, 20.0, 50.0],
            branching: 5,
            depth: 5,
            selection_k: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("margin", self.margin),
            ("learning_rate", self.learning_rate),
            ("mass_scale", self.mass_scale),
            ("alpha", self.alpha),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig("batch_size must be at least 2".into()));
        }
        if self.branching == 0 {
            return Err(Error::InvalidConfig("branching must be at least 1".into()));
        }
        if self.selection_k == 0 {
            return Err(Error::InvalidConfig("selection_k must be at least 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "validation_fraction must lie in (0,1), got {}",
                self.validation_fraction
            )));
        }
        if let Some(m) = self.margin_grid.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidConfig(format!("margin grid entry {m} is not positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the lowest validation loss.
    pub model: SoftTreeModel,
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    pub log: Vec<EpochRecord>,
}

fn ensure_two_labels(corpus: &LabeledCorpus, part: SplitPart) -> Result<()> {
    let labels = corpus.labels_in(part);
    if labels.len() < 2 {
        return Err(Error::DegenerateLabels(format!("{} split has {} distinct label(s)", part.name(), labels.len())));
    }
    Ok(())
}

/// Corpus with a validation split, carving one from the training split when
/// none is given.
fn with_validation(corpus: &LabeledCorpus, cfg: &TrainConfig) -> Result<LabeledCorpus> {
    if corpus.split.valid.is_empty() {
        corpus.carve_validation(cfg.validation_fraction, cfg.seed)
    } else {
        Ok(corpus.clone())
    }
}

fn validation_loss(model: &SoftTreeModel, corpus: &LabeledCorpus, cfg: &TrainConfig) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0;
    for chunk in corpus.split.valid.chunks(cfg.batch_size) {
        let batch = PairBatch::from_indices(&corpus.documents, chunk);
        if batch.is_empty() {
            continue;
        }
        total += contrastive_loss(model, &batch, &corpus.documents, cfg)?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptySplit("validation split yields no document pairs"));
    }
    Ok(total / count as f64)
}

/// Fits the leaf-attachment logits by mini-batch Adam on the contrastive
/// loss. Each epoch shuffles the training split, cuts it into batches of
/// `batch_size` documents and uses every within-batch pair. The returned
/// model is the epoch snapshot with the lowest validation loss (earliest on
/// ties). Deterministic for a fixed seed, independent of thread count.
pub fn train(corpus: &LabeledCorpus, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let corpus = with_validation(corpus, cfg)?;
    ensure_two_labels(&corpus, SplitPart::Train)?;
    ensure_two_labels(&corpus, SplitPart::Valid)?;

    let internal = perfect_kary_internal(cfg.branching, cfg.depth)?;
    let mut model = SoftTreeModel::initialize(internal, corpus.n_leaf(), cfg.alpha, cfg.seed)?;
    let mut state = AdamState::new(model.theta().dim());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order = corpus.split.train.clone();
    let start = Stopwatch::start();

    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, SoftTreeModel)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = PairBatch::from_indices(&corpus.documents, chunk);
            if batch.is_empty() {
                continue;
            }
            let (loss, grad) = loss_and_gradient(&model, &batch, &corpus.documents, cfg)?;
            adam_step(model.theta_mut(), &grad, &mut state, cfg.learning_rate);
            epoch_loss += loss;
            steps += 1;
        }
        let train_loss = if steps > 0 { epoch_loss / steps as f64 } else { f64::NAN };
        let valid_loss = validation_loss(&model, &corpus, cfg)?;
        log::debug!("epoch {epoch}: train {train_loss:.6} valid {valid_loss:.6}");
        log.push(EpochRecord { epoch, train_loss, valid_loss, wall_time_secs: start.elapsed_secs() });
        if best.as_ref().is_none_or(|(_, l, _)| valid_loss < *l) {
            best = Some((epoch, valid_loss, model.clone()));
        }
    }
    let (best_epoch, best_valid_loss, model) = best.expect("at least one epoch");
    Ok(TrainOutcome { model, best_epoch, best_valid_loss, log })
}

#[derive(Debug, Clone)]
pub struct MarginSelection {
    pub margin: f64,
    /// `(margin, validation kNN error)` for every candidate, in grid order.
    pub candidates: Vec<(f64, f64)>,
    /// The training run of the chosen margin.
    pub outcome: TrainOutcome,
}

/// Trains once per candidate margin and keeps the one whose hardened tree
/// has the lowest validation kNN error (smaller margin on ties).
pub fn select_margin(corpus: &LabeledCorpus, cfg: &TrainConfig) -> Result<MarginSelection> {
    if cfg.margin_grid.is_empty() {
        return Err(Error::InvalidConfig("margin grid is empty".into()));
    }
    cfg.validate()?;
    let corpus = with_validation(corpus, cfg)?;
    let mut candidates = Vec::with_capacity(cfg.margin_grid.len());
    let mut best: Option<(f64, f64, TrainOutcome)> = None;
    for &margin in &cfg.margin_grid {
        let run = TrainConfig { margin, ..cfg.clone() };
        let outcome = train(&corpus, &run)?;
        let provider = TreeProvider::new("stw", harden(&outcome.model));
        let error = knn_error(&provider, &corpus, SplitPart::Train, SplitPart::Valid, cfg.selection_k)?;
        candidates.push((margin, error));
        let better = match &best {
            None => true,
            Some((bm, be, _)) => error < *be || (error == *be && margin < *bm),
        };
        if better {
            best = Some((margin, error, outcome));
        }
    }
    let (margin, _, outcome) = best.expect("nonempty grid");
    Ok(MarginSelection { margin, candidates, outcome })
}
