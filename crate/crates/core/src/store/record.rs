use serde::{Deserialize, Serialize};

use crate::engine::kernel;
use crate::error::{Error, Result};

/// Longest source tag the segment format can carry (u16 length prefix).
pub const MAX_SOURCE_TAG_BYTES: usize = u16::MAX as usize;

/// One stored support sample: a labeled feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: u64,
    pub label_id: u32,
    pub vector: Vec<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_tag: Option<String>,
}

impl EmbeddingRecord {
    pub fn new(id: u64, label_id: u32, vector: Vec<f32>) -> Self {
        Self {
            id,
            label_id,
            vector,
            source_tag: None,
        }
    }

    pub fn with_source_tag(mut self, tag: impl Into<String>) -> Self {
        let tag = tag.into();
        self.source_tag = if tag.is_empty() { None } else { Some(tag) };
        self
    }
}

/// Borrowed view of a live record inside a collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordRef<'a> {
    pub id: u64,
    pub label_id: u32,
    pub vector: &'a [f32],
    pub source_tag: Option<&'a str>,
    /// Squared Euclidean norm, cached at insert.
    pub norm_sq: f64,
}

impl RecordRef<'_> {
    pub fn to_record(&self) -> EmbeddingRecord {
        EmbeddingRecord {
            id: self.id,
            label_id: self.label_id,
            vector: self.vector.to_vec(),
            source_tag: self.source_tag.map(str::to_owned),
        }
    }
}

/// Checks the vector invariants shared by stored records and queries and
/// returns the squared Euclidean norm.
pub fn validate_vector(what: impl Fn() -> String, vector: &[f32], dimension: usize) -> Result<f64> {
    if vector.len() != dimension {
        return Err(Error::DimensionMismatch {
            what: what(),
            expected: dimension,
            actual: vector.len(),
        });
    }
    if let Some(index) = vector.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            what: what(),
            index,
        });
    }
    let norm_sq = kernel::norm_sq(vector);
    if norm_sq == 0.0 {
        return Err(Error::ZeroNorm { what: what() });
    }
    Ok(norm_sq)
}
