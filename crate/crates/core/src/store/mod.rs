//! Persistent, mutable repository of labeled feature embeddings.

mod collection;
mod manifest;
mod persist;
mod record;
pub mod segment;

pub use collection::{Catalog, Collection, DeleteOutcome, Predicate};
pub use manifest::{Manifest, SegmentEntry, FORMAT_VERSION, MANIFEST_FILE};
pub use persist::{load, read_manifest, save, save_with, SaveOptions};
pub use record::{validate_vector, EmbeddingRecord, RecordRef, MAX_SOURCE_TAG_BYTES};
