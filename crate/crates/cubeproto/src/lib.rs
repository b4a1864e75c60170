//! Balanced cube sampling for mixed-type data, with inclusion probabilities
//! derived from the first principal component, k-prototypes clustering of
//! the sample, and reverse mapping of the remaining units.
//!
//! The pipeline: encode the dataset, project it onto its first principal
//! axis, turn the per-row scores into inclusion probabilities that sum to
//! the requested sample size, draw a balanced sample with the cube method
//! (flight walk plus landing enumeration), cluster the sample with
//! k-prototypes, and assign every unsampled unit to its nearest prototype.
//! Clustering accuracy against ground-truth labels evaluates the result.

pub mod data;
pub mod error;
pub mod inclusion;
pub mod kproto;
pub mod metrics;
pub mod pca;
pub mod pipeline;
pub mod sampling;

pub use error::{Error, Result};
