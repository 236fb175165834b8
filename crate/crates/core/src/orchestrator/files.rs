//! Reading an input tree and writing the ported tree in the same layout.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use crate::source::{parse_units, SourceError, SourceUnit};

fn is_c_source(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()), Some("c" | "h"))
}

/// Input units named by their path relative to the input they came from:
/// a file keeps its file name, files under a directory their relative path.
pub fn collect_inputs(paths: &[PathBuf]) -> Result<Vec<SourceUnit>, SourceError> {
    let mut pairs: Vec<(PathBuf, PathBuf)> = Vec::new();
    for p in paths {
        let meta = fs::metadata(p).map_err(|e| SourceError::Io {
            path: p.clone(),
            source: e,
        })?;
        if meta.is_dir() {
            let mut found = Vec::new();
            for entry in WalkDir::new(p).sort_by_file_name() {
                let entry = entry.map_err(|e| SourceError::Io {
                    path: p.clone(),
                    source: e.into(),
                })?;
                if entry.file_type().is_file() && is_c_source(entry.path()) {
                    let rel = entry
                        .path()
                        .strip_prefix(p)
                        .unwrap_or(entry.path())
                        .to_path_buf();
                    found.push((entry.path().to_path_buf(), rel));
                }
            }
            pairs.extend(found);
        } else {
            let rel = p
                .file_name()
                .map(PathBuf::from)
                .unwrap_or_else(|| p.clone());
            pairs.push((p.clone(), rel));
        }
    }
    let mut seen = BTreeSet::new();
    for (abs, rel) in &pairs {
        if !seen.insert(rel.clone()) {
            return Err(SourceError::Io {
                path: abs.clone(),
                source: io::Error::new(
                    io::ErrorKind::AlreadyExists,
                    format!("two inputs map to the same output path {}", rel.display()),
                ),
            });
        }
    }
    let abs: Vec<&PathBuf> = pairs.iter().map(|(a, _)| a).collect();
    let units = parse_units(&abs)?;
    Ok(units
        .into_iter()
        .zip(pairs)
        .map(|(u, (_, rel))| SourceUnit::new(rel, u.text))
        .collect())
}

/// Reads a manifest: one input path per line, relative to the manifest;
/// blank lines and `#` comments are ignored.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>, SourceError> {
    let text = fs::read_to_string(path).map_err(|e| SourceError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

/// Writes `(relative path, text)` pairs under `out`.
pub fn write_tree(out: &Path, files: &[(PathBuf, String)]) -> io::Result<()> {
    fs::create_dir_all(out)?;
    for (rel, text) in files {
        let path = out.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, text)?;
    }
    Ok(())
}
