//! Supervised tree-Wasserstein (STW) metric learning for documents.
//!
//! A document is a normalized bag-of-words over a fixed vocabulary. Words are
//! the leaves of a rooted tree and the distance between two documents is the
//! tree-Wasserstein distance: the edge-weighted L1 difference of the mass each
//! document places in every subtree. [`stw`] learns where each word attaches
//! to a fixed internal tree from labeled documents, using a differentiable
//! relaxation of that distance and a contrastive loss. The learned tree is then
//! hardened and served by the exact kernels in [`tree`].
//!
//! Unsupervised tree baselines (Quadtree, Flowtree, tree-sliced Wasserstein)
//! live in [`baselines`], and [`ot`] provides an exact transport solver and
//! Sinkhorn for verification at small sizes.

pub mod baselines;
mod clock;
pub mod data_io;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod measures;
pub mod ot;
pub mod stw;
pub mod tree;

pub use error::{Error, Result};
pub use measures::{Document, LabeledCorpus, Split, Vocabulary};
pub use tree::TreeAdjacency;
