//! Binary layout:
//!
//! ```text
//! magic "CFDSET\0\0" | version u32 LE | header length u64 LE | header JSON
//! | window count u64 LE | per window: ped u64, t0 f64, n u64, n × (x y u v) f64
//! | SHA-256 of everything above (32 bytes)
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DataError, DataWindow, WindowConfig, WindowedDataset};
use crate::forecaster::{Standardization, StateSample};

pub const CACHE_MAGIC: &[u8; 8] = b"CFDSET\0\0";
pub const CACHE_VERSION: u32 = 1;

/// Provenance and parameters stored ahead of the windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub source: String,
    /// Input files and their SHA-256 digests.
    pub inputs: Vec<(String, String)>,
    pub config: WindowConfig,
    pub standardization: Standardization,
    pub skipped_tracks: usize,
}

pub fn write_cache<W: Write>(
    mut writer: W,
    ds: &WindowedDataset,
    inputs: &[(String, String)],
) -> Result<(), DataError> {
    let header = CacheHeader {
        source: ds.source.clone(),
        inputs: inputs.to_vec(),
        config: ds.config,
        standardization: ds.standardization,
        skipped_tracks: ds.skipped_tracks,
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&(ds.windows.len() as u64).to_le_bytes());
    for w in &ds.windows {
        buf.extend_from_slice(&w.ped.to_le_bytes());
        buf.extend_from_slice(&w.t0.to_le_bytes());
        buf.extend_from_slice(&(w.samples.len() as u64).to_le_bytes());
        for s in &w.samples {
            for v in [s.x, s.y, s.u, s.v] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let digest = Sha256::digest(&buf);
    writer.write_all(&buf)?;
    writer.write_all(&digest)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| DataError::Format("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, DataError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, DataError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Reads a cache, verifying magic, version and checksum.
pub fn read_cache<R: Read>(mut reader: R) -> Result<(WindowedDataset, CacheHeader), DataError> {
    let mut all = Vec::new();
    reader.read_to_end(&mut all)?;
    if all.len() < CACHE_MAGIC.len() + 4 + 32 || &all[..8] != CACHE_MAGIC {
        return Err(DataError::Format("not a dataset cache".into()));
    }
    let (body, digest) = all.split_at(all.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(DataError::Checksum);
    }
    let mut c = Cursor { buf: body, pos: 8 };
    let version = u32::from_le_bytes(c.take(4)?.try_into().expect("4 bytes"));
    if version != CACHE_VERSION {
        return Err(DataError::Version(version));
    }
    let hlen = c.u64()? as usize;
    let header: CacheHeader = serde_json::from_slice(c.take(hlen)?)?;
    let count = c.u64()? as usize;
    let mut windows = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let ped = c.u64()?;
        let t0 = c.f64()?;
        let n = c.u64()? as usize;
        if n != header.config.len() {
            return Err(DataError::Format(format!("window of {n} samples, expected {}", header.config.len())));
        }
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            samples.push(StateSample::new(c.f64()?, c.f64()?, c.f64()?, c.f64()?));
        }
        windows.push(DataWindow { ped, t0, samples });
    }
    if c.pos != body.len() {
        return Err(DataError::Format("trailing bytes".into()));
    }
    let ds = WindowedDataset {
        windows,
        source: header.source.clone(),
        config: header.config,
        standardization: header.standardization,
        skipped_tracks: header.skipped_tracks,
    };
    Ok((ds, header))
}
