//! Correct-and-Smooth for transductive node classification: sparse graph operators, label
//! propagation, spectral embeddings, graph-agnostic base predictors, the error-correction and
//! smoothing stages, and the dataset/benchmark plumbing around them.

pub mod bench;
pub mod correct_smooth;
pub mod data;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod model;
pub mod propagation;
pub mod spectral;

pub use error::{Error, Result};

/// Dense `n x c` matrix of per-node class scores.
pub type ProbMatrix = ndarray::Array2<f64>;
