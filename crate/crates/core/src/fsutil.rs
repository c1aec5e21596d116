//! Whole-directory outputs that either appear complete or not at all.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Populate a sibling staging directory with `fill`, then swap it into
/// place at `out`. On error the staging directory is removed and any
/// previous `out` is left untouched.
pub fn write_dir_atomically<T>(out: &Path, fill: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
    let staging = staging_path(out);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    let value = match fill(&staging) {
        Ok(v) => v,
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
    };
    if out.exists() {
        fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
    }
    fs::rename(&staging, out).map_err(|e| Error::io(out, e))?;
    Ok(value)
}

/// Write a single file through a temporary sibling and rename.
pub fn write_file_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = staging_path(path);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn staging_path(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!(".{name}.partial-{}", std::process::id()))
}

pub fn require_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingPath(path.to_path_buf()))
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    require_exists(path)?;
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_fill_leaves_previous_output() {
        let root = tempfile::tempdir().unwrap();
        let out = root.path().join("out");
        write_dir_atomically(&out, |d| {
            fs::write(d.join("a.txt"), "one").map_err(|e| Error::io(d, e))
        })
        .unwrap();
        let r: Result<()> = write_dir_atomically(&out, |d| {
            fs::write(d.join("a.txt"), "two").unwrap();
            Err(Error::Config("boom".into()))
        });
        assert!(r.is_err());
        assert_eq!(fs::read_to_string(out.join("a.txt")).unwrap(), "one");
        let leftovers: Vec<_> = fs::read_dir(root.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn rerun_overwrites() {
        let root = tempfile::tempdir().unwrap();
        let out = root.path().join("out");
        for text in ["one", "two"] {
            write_dir_atomically(&out, |d| {
                fs::write(d.join("a.txt"), text).map_err(|e| Error::io(d, e))
            })
            .unwrap();
        }
        assert_eq!(fs::read_to_string(out.join("a.txt")).unwrap(), "two");
    }
}
