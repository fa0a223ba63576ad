use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// JSON manifest describing a saved collection (or an encoder export).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub name: String,
    pub dimension: usize,
    pub labels: Vec<String>,
    pub record_count: u64,
    pub segments: Vec<SegmentEntry>,
    pub generation: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentEntry {
    /// Relative to the directory holding the manifest.
    pub path: String,
    pub crc32c: u32,
    pub count: u64,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Manifest {
            path: path.to_path_buf(),
            source,
        })?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: manifest.format_version,
                supported: FORMAT_VERSION,
            });
        }
        let sum: u64 = manifest.segments.iter().map(|s| s.count).sum();
        if sum != manifest.record_count {
            return Err(Error::invalid(
                "record_count",
                format!("manifest declares {} records but segments hold {sum}", manifest.record_count),
            ));
        }
        Ok(manifest)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}
