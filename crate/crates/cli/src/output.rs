//! Deterministic CSV and manifest output.
//!
//! Floating-point values are printed with 17 significant digits so a rerun
//! with the same seed is byte-identical. Files are written to a temporary
//! sibling and renamed into place.

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Format a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Accumulates one CSV file in memory; `write` commits it atomically.
pub struct Csv {
    path: PathBuf,
    buf: String,
}

impl Csv {
    pub fn new(path: impl Into<PathBuf>, header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        Self {
            path: path.into(),
            buf,
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.buf, "{}", fields.join(","));
    }

    pub fn write(self) -> Result<PathBuf> {
        write_atomic(&self.path, self.buf.as_bytes())?;
        Ok(self.path)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating output directory {}", parent.display()))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("committing {}", path.display()))?;
    Ok(())
}

/// Run manifest: scenario hash, seed, tool version, command. No
/// timestamps, so reruns stay byte-identical.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    scenario_bytes: Option<&[u8]>,
    seed: u64,
) -> Result<()> {
    let hash = match scenario_bytes {
        Some(bytes) => {
            let mut hasher = Sha256::new();
            hasher.update(bytes);
            format!("{:x}", hasher.finalize())
        }
        None => "builtin".to_string(),
    };
    let body = format!(
        "tool = plaposc {}\ncommand = {command}\nscenario_sha256 = {hash}\nseed = {seed}\n",
        env!("CARGO_PKG_VERSION")
    );
    write_atomic(&out_dir.join("run_manifest.txt"), body.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_17_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(-0.5), "-5.0000000000000000e-1");
    }
}
