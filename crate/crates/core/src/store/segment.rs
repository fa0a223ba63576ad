//! EMBV1 segment codec.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "EMBV" 0x01 | dimension u32 | record_count u64
//! record_count × ( id u64 | label_id u32 | tag_len u16 | tag bytes | dimension × f32 )
//! crc32c u32 over every preceding byte
//! ```
//!
//! A zero-length tag decodes as "no source tag".

use std::path::{Path, PathBuf};

use crc::{Crc, CRC_32_ISCSI};

use super::record::EmbeddingRecord;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMBV";
pub const VERSION: u8 = 0x01;
/// magic + version + dimension + record_count
pub const HEADER_LEN: usize = 4 + 1 + 4 + 8;
pub const TRAILER_LEN: usize = 4;

const CRC32C: Crc<u32> = Crc::<u32>::new(&CRC_32_ISCSI);

pub fn crc32c(bytes: &[u8]) -> u32 {
    CRC32C.checksum(bytes)
}

/// A decoded segment: its dimension and records in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub dimension: usize,
    pub records: Vec<EmbeddingRecord>,
}

/// Encodes records into an EMBV1 byte buffer. Every vector must already
/// have `dimension` components; the store enforces that at insert.
pub fn encode<'a, I>(dimension: usize, records: I) -> Vec<u8>
where
    I: IntoIterator<Item = (u64, u32, Option<&'a str>, &'a [f32])>,
    I::IntoIter: ExactSizeIterator,
{
    let records = records.into_iter();
    let count = records.len();
    let mut buf = Vec::with_capacity(HEADER_LEN + count * (14 + dimension * 4) + TRAILER_LEN);
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.extend_from_slice(&(dimension as u32).to_le_bytes());
    buf.extend_from_slice(&(count as u64).to_le_bytes());
    for (id, label_id, tag, vector) in records {
        assert_eq!(vector.len(), dimension, "record {id} has wrong dimension");
        buf.extend_from_slice(&id.to_le_bytes());
        buf.extend_from_slice(&label_id.to_le_bytes());
        let tag = tag.unwrap_or("").as_bytes();
        buf.extend_from_slice(&(tag.len() as u16).to_le_bytes());
        buf.extend_from_slice(tag);
        for x in vector {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let crc = crc32c(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn encode_records(dimension: usize, records: &[EmbeddingRecord]) -> Vec<u8> {
    encode(
        dimension,
        records
            .iter()
            .map(|r| (r.id, r.label_id, r.source_tag.as_deref(), r.vector.as_slice())),
    )
}

/// Decodes and verifies an EMBV1 buffer. `path` only labels diagnostics.
///
/// Magic and version are checked first so that a foreign file fails at its
/// first byte. A checksum mismatch is reported as truncation or a format
/// error when the body does not even parse, and as a checksum failure
/// otherwise.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Segment> {
    let path = path.to_path_buf();
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(Error::Format {
            path,
            offset: 0,
            detail: "missing EMBV magic".into(),
        });
    }
    if bytes.len() < 5 {
        return Err(truncated(path, 4, "version byte"));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format {
            path,
            offset: 4,
            detail: format!("unsupported segment version 0x{:02x}", bytes[4]),
        });
    }
    if bytes.len() < HEADER_LEN + TRAILER_LEN {
        return Err(truncated(path, bytes.len() as u64, "header or checksum trailer"));
    }
    let body_len = bytes.len() - TRAILER_LEN;
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
    let actual = crc32c(&bytes[..body_len]);
    let parsed = parse_body(&bytes[..body_len], &path);
    if stored != actual {
        return Err(match parsed {
            Err(e) => e,
            Ok(_) => Error::ChecksumFailed {
                path,
                expected: stored,
                actual,
            },
        });
    }
    parsed
}

fn truncated(path: PathBuf, offset: u64, what: &str) -> Error {
    Error::Truncated {
        path,
        offset,
        detail: format!("expected {what}"),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(truncated(self.path.to_path_buf(), self.pos as u64, what));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn parse_body(body: &[u8], path: &Path) -> Result<Segment> {
    let mut cur = Cursor {
        bytes: body,
        pos: 5,
        path,
    };
    let dimension = cur.u32("dimension")? as usize;
    let count = cur.u64("record count")?;
    let min_record = 14 + dimension * 4;
    let remaining = (body.len() - cur.pos) as u64;
    if count > remaining / min_record as u64 {
        return Err(truncated(
            path.to_path_buf(),
            body.len() as u64,
            &format!("{count} records of at least {min_record} bytes"),
        ));
    }
    let mut records = Vec::with_capacity(count as usize);
    for i in 0..count {
        let id = cur.u64("record id")?;
        let label_id = cur.u32("label id")?;
        let tag_len = cur.u16("source tag length")? as usize;
        let tag_at = cur.pos;
        let tag = cur.take(tag_len, "source tag bytes")?;
        let tag = std::str::from_utf8(tag).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            offset: (tag_at + e.valid_up_to()) as u64,
            detail: format!("source tag of record {i} is not UTF-8"),
        })?;
        let raw = cur.take(dimension * 4, "vector components")?;
        let vector = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let record = EmbeddingRecord::new(id, label_id, vector);
        records.push(if tag.is_empty() { record } else { record.with_source_tag(tag) });
    }
    if cur.pos != body.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: cur.pos as u64,
            detail: format!("{} unexpected bytes after last record", body.len() - cur.pos),
        });
    }
    Ok(Segment { dimension, records })
}

pub fn read_file(path: &Path) -> Result<Segment> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode(&bytes, path)
}
