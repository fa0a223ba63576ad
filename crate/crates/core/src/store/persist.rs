//! Saving and loading collections as a manifest plus EMBV1 segments.
//!
//! A save writes fresh segment files, then atomically renames a new
//! `manifest.json` into place, then removes segment files the new manifest
//! no longer references. Tombstoned records are not written, so every save
//! is also a compaction. Only the rename is atomic; there is no journal.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::collection::Collection;
use super::manifest::{Manifest, SegmentEntry, FORMAT_VERSION, MANIFEST_FILE};
use super::segment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SaveOptions {
    pub max_records_per_segment: usize,
}

impl Default for SaveOptions {
    fn default() -> Self {
        Self {
            max_records_per_segment: 1 << 16,
        }
    }
}

pub fn save(collection: &Collection, dir: &Path) -> Result<Manifest> {
    save_with(collection, dir, SaveOptions::default())
}

pub fn save_with(collection: &Collection, dir: &Path, opts: SaveOptions) -> Result<Manifest> {
    let per_segment = opts.max_records_per_segment.max(1);
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;

    let records: Vec<_> = collection.scan().collect();
    let mut segments = Vec::new();
    // An empty collection still gets one (empty) segment so the dimension
    // is recorded in binary form as well.
    let chunks: Vec<_> = if records.is_empty() {
        vec![&records[..]]
    } else {
        records.chunks(per_segment).collect()
    };
    for (i, chunk) in chunks.into_iter().enumerate() {
        let bytes = segment::encode(
            collection.dimension(),
            chunk.iter().map(|r| (r.id, r.label_id, r.source_tag, r.vector)),
        );
        let crc = segment::crc32c(&bytes);
        let name = format!("seg-{:016x}-{i:05}-{crc:08x}.embv", collection.generation());
        write_atomic(&dir.join(&name), &bytes)?;
        segments.push(SegmentEntry {
            path: name,
            crc32c: crc,
            count: chunk.len() as u64,
        });
    }

    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        name: collection.name().to_owned(),
        dimension: collection.dimension(),
        labels: collection.labels().to_vec(),
        record_count: records.len() as u64,
        segments,
        generation: collection.generation(),
    };
    write_atomic(&dir.join(MANIFEST_FILE), manifest.to_json().as_bytes())?;
    sync_dir(dir);
    remove_stale_segments(dir, &manifest);
    Ok(manifest)
}

/// Loads a collection from a directory containing `manifest.json`, or from
/// a manifest file path directly.
pub fn load(path: &Path) -> Result<Collection> {
    let (manifest, base) = read_manifest(path)?;
    let mut collection = Collection::new(manifest.name.clone(), manifest.dimension, manifest.labels.clone())?;
    for entry in &manifest.segments {
        let seg_path = base.join(&entry.path);
        let bytes =
            fs::read(&seg_path).map_err(|e| Error::io(format!("reading {}", seg_path.display()), e))?;
        let actual = segment::crc32c(&bytes);
        if actual != entry.crc32c {
            // still decode first: a structurally broken file gets the more
            // precise diagnostic
            segment::decode(&bytes, &seg_path)?;
            return Err(Error::ChecksumFailed {
                path: seg_path,
                expected: entry.crc32c,
                actual,
            });
        }
        let seg = segment::decode(&bytes, &seg_path)?;
        if seg.dimension != manifest.dimension {
            return Err(Error::DimensionMismatch {
                what: format!("segment {}", seg_path.display()),
                expected: manifest.dimension,
                actual: seg.dimension,
            });
        }
        if seg.records.len() as u64 != entry.count {
            return Err(Error::invalid(
                "segments.count",
                format!("{} holds {} records, manifest says {}", entry.path, seg.records.len(), entry.count),
            ));
        }
        collection.insert(seg.records)?;
    }
    collection.set_generation(manifest.generation);
    Ok(collection)
}

/// Resolves `path` to a manifest and the directory its segment paths are
/// relative to.
pub fn read_manifest(path: &Path) -> Result<(Manifest, PathBuf)> {
    let manifest_path = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let base = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((Manifest::read(&manifest_path)?, base))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let ctx = |what: &str| format!("{what} {}", tmp.display());
    let mut file = File::create(&tmp).map_err(|e| Error::io(ctx("creating"), e))?;
    file.write_all(bytes).map_err(|e| Error::io(ctx("writing"), e))?;
    file.sync_all().map_err(|e| Error::io(ctx("syncing"), e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming into {}", path.display()), e))
}

fn sync_dir(dir: &Path) {
    // best effort; not every platform allows opening directories
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
}

fn remove_stale_segments(dir: &Path, manifest: &Manifest) {
    let keep: HashSet<&str> = manifest.segments.iter().map(|s| s.path.as_str()).collect();
    let Ok(entries) = fs::read_dir(dir) else { return };
    for entry in entries.flatten() {
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if name.starts_with("seg-") && name.ends_with(".embv") && !keep.contains(name) {
            let _ = fs::remove_file(entry.path());
        }
    }
}
