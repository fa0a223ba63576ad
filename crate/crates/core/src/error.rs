use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the store, engine and harness can report.
///
/// [`Error::code`] gives the stable machine-readable code used on the wire.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },
    #[error("vector for {what} has zero norm")]
    ZeroNorm { what: String },
    #[error("vector for {what} has a non-finite component at index {index}")]
    NonFinite { what: String, index: usize },
    #[error("record {id} is already live in the collection")]
    DuplicateId { id: u64 },
    #[error("unknown record id {id}")]
    UnknownId { id: u64 },
    #[error("label {label} is not valid for {what}")]
    LabelInvalid { what: String, label: String },
    #[error("collection {name:?} holds no knowledge (no live records)")]
    EmptyCollection { name: String },
    #[error("collection {name:?} already exists")]
    DuplicateCollection { name: String },
    #[error("unknown collection {name:?}")]
    UnknownCollection { name: String },
    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: String, reason: String },
    #[error("checksum mismatch in {}: expected {expected:08x}, found {actual:08x}", path.display())]
    ChecksumFailed {
        path: PathBuf,
        expected: u32,
        actual: u32,
    },
    #[error("{} is truncated at byte offset {offset}: {detail}", path.display())]
    Truncated {
        path: PathBuf,
        offset: u64,
        detail: String,
    },
    #[error("malformed {} at byte offset {offset}: {detail}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        detail: String,
    },
    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("manifest {}: {source}", path.display())]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report: {0}")]
    Report(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::ZeroNorm { .. } => "ZERO_NORM",
            Error::NonFinite { .. } => "NON_FINITE",
            Error::DuplicateId { .. } => "DUPLICATE_ID",
            Error::UnknownId { .. } => "UNKNOWN_ID",
            Error::LabelInvalid { .. } => "LABEL_INVALID",
            Error::EmptyCollection { .. } => "EMPTY_COLLECTION",
            Error::DuplicateCollection { .. } => "DUPLICATE_COLLECTION",
            Error::UnknownCollection { .. } => "UNKNOWN_COLLECTION",
            Error::InvalidArgument { .. } => "INVALID_ARGUMENT",
            Error::ChecksumFailed { .. } => "CHECKSUM_FAILED",
            Error::Truncated { .. } => "TRUNCATED",
            Error::Format { .. } => "FORMAT_ERROR",
            Error::UnsupportedVersion { .. } => "UNSUPPORTED_VERSION",
            Error::Manifest { .. } => "MANIFEST_INVALID",
            Error::Io { .. } => "IO_ERROR",
            Error::Report(_) => "REPORT_INVALID",
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
