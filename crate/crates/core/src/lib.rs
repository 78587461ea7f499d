//! Hierarchical multiplex graph embedding.
//!
//! Each layer convolves every dimension of a multiplex graph, aggregates
//! the per-dimension embeddings with attention, and merges the adjacency
//! matrices into fewer latent dimensions through trainable softmax weights.
//! A final convolution on the last single latent graph gives the node
//! embeddings. Training maximizes mutual information between node
//! embeddings and a graph summary against feature-shuffled negatives.
//!
//! Module map:
//!
//! * [`graph`]: the multiplex data model
//! * [`sparse`]: CSR storage and kernels
//! * [`io`]: the dataset directory format
//! * [`autodiff`]: reverse-mode tape with the ops the encoder needs
//! * [`model`]: the encoder and its parameters
//! * [`train`]: InfoMax objective and training loop
//! * [`sbm`]: synthetic block-model multiplexes
//! * [`eval`]: metrics and experiment drivers
//! * [`checkpoint`]: `model.bin` and CSV exports
//! * [`par`]: data-parallel helpers with a sequential fallback

pub mod autodiff;
pub mod checkpoint;
mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod model;
pub mod par;
pub mod sbm;
pub mod sparse;
pub mod train;

pub use error::{Error, Result};
