use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::config::Emit;
use crate::error::CliResult;

/// The only place artifacts are written. Commands compute first (possibly in
/// parallel) and hand finished bytes over here in a fixed order.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    emit: BTreeSet<Emit>,
    written: Vec<PathBuf>,
}

fn io_err(path: &Path, source: std::io::Error) -> chiral_qhe::Error {
    chiral_qhe::Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl ArtifactWriter {
    pub fn new(dir: &Path, emit: BTreeSet<Emit>) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            emit,
            written: Vec::new(),
        })
    }

    pub fn wants(&self, kind: Emit) -> bool {
        self.emit.contains(&kind)
    }

    /// Writes `name` if `kind` is enabled.
    pub fn write(&mut self, kind: Emit, name: &str, bytes: &[u8]) -> CliResult<()> {
        if !self.wants(kind) {
            return Ok(());
        }
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Writes a single file outside an artifact directory.
pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    Ok(())
}
