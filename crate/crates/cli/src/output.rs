//! Artifacts are staged in a scratch directory and moved into place only
//! when a command succeeds.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use tempfile::TempDir;
use thalparc_core::Result;

pub struct Staging {
    dir: Option<TempDir>,
    target: PathBuf,
    files: Vec<PathBuf>,
    /// The target did not exist before; remove it again if nothing lands.
    created: bool,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self> {
        let created = !target.exists();
        std::fs::create_dir_all(target)?;
        let dir = tempfile::Builder::new().prefix(".staging-").tempdir_in(target)?;
        Ok(Self {
            dir: Some(dir),
            target: target.to_path_buf(),
            files: Vec::new(),
            created,
        })
    }

    fn staging_path(&self) -> &Path {
        self.dir.as_ref().expect("staging directory").path()
    }

    /// Writes `name` (relative, may contain subdirectories) via `f`.
    pub fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let path = self.staging_path().join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }

    pub fn write_str(&mut self, name: &str, text: &str) -> Result<()> {
        self.write(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    /// Moves every staged file into the target directory. Dropping a
    /// `Staging` without committing deletes the staged files.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        self.created = false;
        let mut placed = Vec::with_capacity(self.files.len());
        for rel in &self.files {
            let dst = self.target.join(rel);
            if let Some(parent) = dst.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::rename(self.staging_path().join(rel), &dst)?;
            placed.push(dst);
        }
        Ok(placed)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        drop(self.dir.take());
        if self.created {
            // no-op unless empty
            let _ = std::fs::remove_dir(&self.target);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropped_staging_leaves_nothing() {
        let root = tempfile::tempdir().unwrap();
        {
            let mut s = Staging::new(root.path()).unwrap();
            s.write_str("a.tsv", "x\n").unwrap();
        }
        assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 0);
        let fresh = root.path().join("new");
        {
            let mut s = Staging::new(&fresh).unwrap();
            s.write_str("a.tsv", "x\n").unwrap();
        }
        assert!(!fresh.exists());
    }

    #[test]
    fn commit_places_files() {
        let root = tempfile::tempdir().unwrap();
        let mut s = Staging::new(root.path()).unwrap();
        s.write_str("sub/b.tsv", "y\n").unwrap();
        s.commit().unwrap();
        assert_eq!(std::fs::read_to_string(root.path().join("sub/b.tsv")).unwrap(), "y\n");
        assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 1);
    }
}
