use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::generate::Artifact;

#[derive(Debug, thiserror::Error)]
#[error("{}: {source}", path.display())]
pub struct EmitError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

/// Writes every file of `artifact` into `dir`, creating it if needed.
/// Files whose contents are unchanged are not rewritten.
pub fn emit(artifact: &Artifact, dir: &Path) -> Result<Vec<PathBuf>, EmitError> {
    fs::create_dir_all(dir).map_err(|source| EmitError {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::with_capacity(artifact.files.len());
    for f in &artifact.files {
        let path = dir.join(&f.name);
        let same = fs::read(&path).is_ok_and(|old| old == f.contents.as_bytes());
        if !same {
            fs::write(&path, &f.contents).map_err(|source| EmitError {
                path: path.clone(),
                source,
            })?;
        }
        written.push(path);
    }
    Ok(written)
}
