use std::io::Write;
use std::path::Path;

use crate::error::{IoError, IoResult};

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> IoResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| IoError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}

pub fn read_all(path: &Path) -> IoResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| IoError::io(path, e))
}

pub fn create_dir(path: &Path) -> IoResult<()> {
    std::fs::create_dir_all(path).map_err(|e| IoError::io(path, e))
}
