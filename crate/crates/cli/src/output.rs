//! Atomic file output and checksums.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::failure::Failure;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Collects every file a command writes so the manifest can list them.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(PathBuf, String)>,
}

impl Outputs {
    /// Writes through a temporary file in the target directory and renames
    /// it into place, so readers never see a partial file.
    pub fn write<F>(&mut self, path: &Path, fill: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut dyn Write) -> Result<(), Failure>,
    {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&dir)?;
        let mut tmp = NamedTempFile::new_in(&dir)?;
        {
            let mut w = BufWriter::new(tmp.as_file_mut());
            fill(&mut w)?;
            w.flush()?;
        }
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| Failure::Input(format!("{}: {}", path.display(), e.error)))?;
        let digest = file_sha256(path)?;
        self.files.push((path.to_path_buf(), digest));
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&mut self, path: &Path, value: &T) -> Result<(), Failure> {
        self.write(path, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }
}
