//! Output paths and atomic file writes.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Overrides the directory that relative output paths resolve against.
pub const OUT_DIR_ENV: &str = "QLAB_OUT_DIR";

/// Resolves `path` against `$QLAB_OUT_DIR` when it is relative.
pub fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Writes through a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(name);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Two-column text: one `x y` pair per line.
pub fn write_columns<X, Y>(path: &Path, rows: impl IntoIterator<Item = (X, Y)>) -> io::Result<()>
where
    X: std::fmt::Display,
    Y: std::fmt::Display,
{
    write_atomic(path, |w| {
        for (x, y) in rows {
            writeln!(w, "{x} {y}")?;
        }
        Ok(())
    })
}
