use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("expected a single-channel raster, got {0} channels")]
    NotSingleChannel(usize),

    #[error("rectangle {x0},{y0} {w}x{h} is outside the {width}x{height} frame")]
    OutOfBounds {
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    #[error("marker exceeds mask at ({x}, {y}): marker {marker} > mask {mask}")]
    MarkerAboveMask { x: usize, y: usize, marker: u8, mask: u8 },

    #[error("invalid label {label} at ({x}, {y})")]
    InvalidLabel { x: usize, y: usize, label: u8 },

    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("value {value} at index {index} is outside [0, 1]")]
    OutOfUnitRange { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate label map: no pixel survives component filtering")]
    Degenerate,

    #[error("invalid P3F data: {0}")]
    P3f(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}
