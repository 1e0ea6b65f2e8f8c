//! Supervised tree-Wasserstein learning.
//!
//! The internal tree `D1` and all edge lengths stay fixed. Each word's parent
//! is relaxed to a distribution over internal nodes, `D2 = softmax(Θ)` taken
//! column-wise, which keeps the relaxed adjacency a valid (fractional) tree.
//! Subtree membership becomes a probability `P = (I - D1)^-1 D2` and the
//! absolute value a smooth surrogate, giving a distance that is
//! differentiable in `Θ`. A contrastive loss pulls same-label documents
//! together and pushes different-label documents apart up to a margin; after
//! training every word is attached to its most probable parent.

mod adam;
mod checkpoint;
mod loss;
mod model;
mod train;

pub use adam::{adam_step, adam_step_scaled, AdamState, StepScale, Unscaled, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use loss::{contrastive_loss, loss_and_gradient, loss_gradient, PairBatch};
pub use model::{harden, smooth_abs, smooth_abs_derivative, soft_tree_wasserstein, SoftTreeModel};
pub use train::{select_margin, train, EpochRecord, MarginSelection, TrainConfig, TrainOutcome};
