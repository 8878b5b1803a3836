//! Atomic file output: write to a temporary file in the target directory,
//! then rename over the destination.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tempfile::NamedTempFile;

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Fails unless the directory that will hold `path` exists.
pub fn check_writable(path: &Path) -> Result<()> {
    let dir = parent_dir(path);
    if !dir.is_dir() {
        bail!("output directory {} does not exist", dir.display());
    }
    if path.is_dir() {
        bail!("output path {} is a directory", path.display());
    }
    Ok(())
}

pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let tmp = NamedTempFile::new_in(parent_dir(path)).with_context(|| format!("creating a temporary file for {}", path.display()))?;
    let mut w = BufWriter::new(tmp);
    body(&mut w).and_then(|()| w.flush()).with_context(|| format!("writing {}", path.display()))?;
    let tmp = w.into_inner().map_err(|e| e.into_error()).with_context(|| format!("writing {}", path.display()))?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Fails unless every file of the hypergraph at `prefix` exists.
pub fn check_input(prefix: &Path) -> Result<()> {
    let files = hyperx::hypergraph::FileSet::from_prefix(prefix);
    for p in [&files.hyperedges, &files.features, &files.labels] {
        if !fs::metadata(p).map(|m| m.is_file()).unwrap_or(false) {
            bail!("input file {} not found", p.display());
        }
    }
    Ok(())
}
