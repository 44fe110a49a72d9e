use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `qkr-detector v<version> config-sha=<sha>`, without the comment marker.
pub fn header_text(sha: &str) -> String {
    format!("qkr-detector v{} config-sha={sha}", env!("CARGO_PKG_VERSION"))
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// CSV text builder: header comment, column line, then rows.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(sha: &str, columns: &[&str]) -> Self {
        let mut text = format!("# {}\n", header_text(sha));
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        write_atomic(path, self.text.as_bytes())
    }
}

/// Pretty JSON object with the header text under `_header`.
pub fn write_json(path: &Path, sha: &str, mut value: serde_json::Value) -> anyhow::Result<()> {
    if let Some(obj) = value.as_object_mut() {
        obj.insert("_header".into(), header_text(sha).into());
    }
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// `path` with its extension removed, for outputs that fan out to several files.
pub fn stem(path: &Path) -> PathBuf {
    path.with_extension("")
}

pub fn sibling(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(num(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn csv_starts_with_header() {
        let mut csv = Csv::new("abc", &["t", "x"]);
        csv.row(&["0".into(), num(1.0)]);
        assert!(csv.text.starts_with("# qkr-detector v"));
        assert!(csv.text.contains("config-sha=abc\nt,x\n0,"));
    }

    #[test]
    fn sibling_paths() {
        let s = stem(Path::new("out/h.csv"));
        assert_eq!(sibling(&s, "_up.csv"), PathBuf::from("out/h_up.csv"));
    }
}
