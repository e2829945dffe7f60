//! Atomic file output: write to a temporary file in the target directory, then rename.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Other(format!("cannot create {}: {e}", dir.display())))
}

/// Calls `fill` on a temporary file and moves it to `dir/name` once it succeeds.
pub fn write_atomic<F>(dir: &Path, name: &str, fill: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    ensure_dir(dir)?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(&target).map_err(|e| CliError::Other(format!("cannot write {}: {e}", target.display())))?;
    Ok(target)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    write_atomic(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

pub fn write_csv<F>(dir: &Path, name: &str, f: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut dyn Write) -> darkpot::Result<()>,
{
    write_atomic(dir, name, |w| f(w).map_err(CliError::from))
}
