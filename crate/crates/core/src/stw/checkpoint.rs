use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::SoftTreeModel;
use super::train::{EpochRecord, TrainConfig};
use crate::error::{Error, Result};
use crate::tree::perfect_kary_internal;

const FORMAT: &str = "stw-checkpoint";
const VERSION: u32 = 1;

/// Trained model on disk. The internal tree is stored by its shape
/// (`branching`, `depth`); `theta` is row-major `n_internal x n_leaf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub branching: usize,
    pub depth: usize,
    pub alpha: f64,
    pub vocab_hash: String,
    pub n_internal: usize,
    pub n_leaf: usize,
    pub theta: Vec<f64>,
    pub best_epoch: usize,
    pub config: TrainConfig,
    pub log: Vec<EpochRecord>,
}

impl Checkpoint {
    pub fn new(
        model: &SoftTreeModel,
        cfg: &TrainConfig,
        vocab_hash: &str,
        best_epoch: usize,
        log: Vec<EpochRecord>,
    ) -> Result<Self> {
        let expected = perfect_kary_internal(cfg.branching, cfg.depth)?;
        if expected != *model.internal() {
            return Err(Error::InvalidConfig("model's internal tree does not match the configured shape".into()));
        }
        Ok(Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            branching: cfg.branching,
            depth: cfg.depth,
            alpha: model.alpha(),
            vocab_hash: vocab_hash.into(),
            n_internal: model.n_internal(),
            n_leaf: model.n_leaf(),
            theta: model.theta().iter().copied().collect(),
            best_epoch,
            config: cfg.clone(),
            log,
        })
    }

    pub fn model(&self) -> Result<SoftTreeModel> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Format(format!("expected {FORMAT} v{VERSION}, got {} v{}", self.format, self.version)));
        }
        let internal = perfect_kary_internal(self.branching, self.depth)?;
        if internal.len() != self.n_internal {
            return Err(Error::Format(format!(
                "checkpoint lists {} internal nodes, shape ({}, {}) has {}",
                self.n_internal,
                self.branching,
                self.depth,
                internal.len()
            )));
        }
        let theta = Array2::from_shape_vec((self.n_internal, self.n_leaf), self.theta.clone())
            .map_err(|e| Error::Format(format!("theta: {e}")))?;
        SoftTreeModel::from_logits(internal, theta, self.alpha)
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    std::fs::write(path, serde_json::to_string(checkpoint)?)?;
    Ok(())
}

/// Loads a checkpoint, rejecting it unless it was trained on `vocab_hash`.
pub fn load_checkpoint(path: impl AsRef<Path>, vocab_hash: &str) -> Result<Checkpoint> {
    let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if ck.vocab_hash != vocab_hash {
        return Err(Error::VocabularyMismatch { expected: ck.vocab_hash, got: vocab_hash.into() });
    }
    Ok(ck)
}
