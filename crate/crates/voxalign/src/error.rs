//! Crate-wide error type.
//!
//! Variants are grouped so callers (notably the CLI) can distinguish
//! validation failures from I/O and format failures.

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A voxel coordinate lies outside its grid.
    #[error("voxel ({x}, {y}, {z}) out of bounds for {dx}x{dy}x{dz} grid")]
    OutOfBounds {
        x: i64,
        y: i64,
        z: i64,
        dx: u32,
        dy: u32,
        dz: u32,
    },

    /// Two inputs disagree in dimensions, channel count, or divisibility.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A point sits on or behind the camera plane (|z_cam| below tolerance).
    #[error("point at or behind the camera plane (z_cam = {z})")]
    BehindCamera { z: f64 },

    /// A depth value is not usable for back-projection.
    #[error("invalid depth {d} (must be > 0)")]
    InvalidDepth { d: f64 },

    /// The intrinsics matrix cannot be inverted.
    #[error("singular intrinsics matrix")]
    SingularMatrix,

    /// A label id has no entry in the active mapping.
    #[error("label id {id} not covered by the mapping")]
    UnmappedLabel { id: u16 },

    /// Construction-time invariant violation (geometry, parameters, config).
    #[error("validation error: {0}")]
    Validation(String),

    /// An operation received input it cannot produce a result for.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A numeric value violates the operation's domain (e.g. negative probability).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed bytes: wrong length, magic, version, or checksum.
    #[error("format error: {0}")]
    Format(String),

    /// Text input that could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid data or parameters rather than
    /// by the byte-level shape of a file or the filesystem.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Format(_) | Error::Parse(_) | Error::Io(_) | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
