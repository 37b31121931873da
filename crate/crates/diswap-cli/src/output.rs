//! Output plumbing: atomic file writes, the `DISWAP_OUT_DIR` prefix and the
//! artifact/summary emission convention.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Environment variable that prefixes relative output paths.
pub const OUT_DIR_ENV: &str = "DISWAP_OUT_DIR";

/// Resolve an output path: relative paths are joined onto `DISWAP_OUT_DIR`
/// when that variable is set.
pub fn resolve_out_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Write bytes to `path` atomically: the content lands under a temporary name
/// in the same directory and is renamed into place, so readers never observe
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(parent)
        .with_context(|| format!("cannot create temp file next to {}", path.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Emit a JSON artifact plus a one-line summary.
///
/// With `--out` the artifact goes to the file and the summary to stdout;
/// without it the artifact itself goes to stdout (so it can be piped) and
/// the summary moves to stderr.
pub fn emit(artifact: &serde_json::Value, out: Option<&Path>, summary: &str) -> Result<()> {
    let mut text = serde_json::to_string_pretty(artifact)?;
    text.push('\n');
    match out {
        Some(path) => {
            let path = resolve_out_path(path);
            write_atomic(&path, text.as_bytes())?;
            println!("{summary} -> {}", path.display());
        }
        None => {
            print!("{text}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

/// Write a CSV artifact (header plus rows of floats) atomically.
pub fn write_csv_table(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<PathBuf> {
    let path = resolve_out_path(path);
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}
