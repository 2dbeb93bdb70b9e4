//! Temporal interaction embeddings for entity integrity classification.
//!
//! The crate covers the whole pipeline:
//!
//! - [`graph`]: multi-relation graph embeddings trained with a margin ranking
//!   loss, used as frozen source/target entity features;
//! - [`model`]: the sequence classifier (feature assembly, RNN / CNN / DeepSet
//!   encoders, attention, pooling, scoring head, checkpoints);
//! - [`train`]: training loop, PR-AUC, data splits, score fusion and the
//!   median-gap evaluation protocol;
//! - [`data`]: interaction logs, labels, the synthetic generator and PCA export;
//! - [`cli`]: the `ties` command line.
//!
//! Everything is built on the small [`nn`] substrate.

pub mod cli;
pub mod data;
mod error;
pub mod graph;
pub mod model;
pub mod nn;
pub mod train;

pub use error::{Error, Result};
