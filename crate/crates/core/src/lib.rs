//! Exact k-nearest-neighbour classification over a mutable embedding store.
//!
//! All task knowledge lives in a [`store::Collection`] of labeled embeddings
//! produced by a frozen encoder. Adding, relabeling or erasing samples is a
//! store mutation; the classifier itself has no trainable state.

pub mod engine;
pub mod error;
pub mod harness;
pub mod store;

pub use engine::{
    classify, classify_batch, neighbor_attribution, neighbor_attribution_with, top_k, AttributionRule,
    ClassificationResult, EngineConfig, LabeledVector, Neighbor, DEFAULT_K,
};
pub use error::{Error, Result};
pub use store::{Catalog, Collection, EmbeddingRecord, Predicate};
