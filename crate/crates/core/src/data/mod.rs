//! ETH/UCY-style pedestrian tracks: loading, resampling into fixed-length
//! windows, leakage-free splits and a checksummed on-disk cache.

mod cache;
mod raw;
mod window;

use thiserror::Error;

pub use cache::{read_cache, write_cache, CacheHeader, CACHE_MAGIC, CACHE_VERSION};
pub use raw::{load_raw, merge_sources, parse_raw, ColumnMap, RawRecord, DEFAULT_FPS};
pub use window::{split, window, DataWindow, WindowConfig, WindowedDataset};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no records in input")]
    EmptyFile,
    #[error("{0}")]
    InvalidArgument(String),
    #[error("cache checksum mismatch")]
    Checksum,
    #[error("unsupported cache version {0}")]
    Version(u32),
    #[error("malformed cache: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
