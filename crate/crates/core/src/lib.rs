//! Tag-based one-class film classification.
//!
//! The pipeline reads MovieLens tag applications and IMDb title metadata,
//! normalizes and stems tags, groups co-occurring tags by modularity, builds
//! unit-normalized group weight vectors per film, and classifies films as
//! members of a labeled category by comparing them with their nearest
//! labeled neighbors.

pub mod cluster;
pub mod error;
pub mod features;
pub mod ingest;
pub mod knn;
pub mod normalize;
pub mod pipeline;
pub mod sparse;

pub use error::{Error, Result};
