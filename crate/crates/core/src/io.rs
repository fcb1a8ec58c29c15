//! File helpers shared by the loaders and writers.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Provenance line written at the top of every line-delimited output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub config_digest: String,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: Header,
}

pub fn header_line(format: &str, config_digest: &str) -> String {
    let line = HeaderLine {
        header: Header {
            format: format.to_string(),
            version: 1,
            config_digest: config_digest.to_string(),
        },
    };
    serde_json::to_string(&line).expect("header serializes")
}

/// Records paired with their 1-based line numbers.
pub type Numbered<T> = Vec<(usize, T)>;

/// Parses a line-delimited JSON file. Blank lines and a leading `{"header": ...}`
/// provenance line are skipped; line numbers in errors are 1-based.
pub fn parse_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<(Option<Header>, Numbered<T>)> {
    let mut header = None;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if out.is_empty() && header.is_none() && line.starts_with("{\"header\"") {
            let h: HeaderLine = serde_json::from_str(line).map_err(|e| Error::parse(line_no, e.to_string()))?;
            header = Some(h.header);
            continue;
        }
        let rec: T = serde_json::from_str(line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        out.push((line_no, rec));
    }
    Ok((header, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Deserialize, PartialEq)]
    struct Row {
        a: u32,
    }

    #[test]
    fn jsonl_skips_header_and_blank_lines() {
        let text = format!("{}\n\n{{\"a\":1}}\n{{\"a\":2}}\n", header_line("rows", "abc"));
        let (header, rows) = parse_jsonl::<Row>(&text).unwrap();
        assert_eq!(header.unwrap().config_digest, "abc");
        assert_eq!(rows, vec![(3, Row { a: 1 }), (4, Row { a: 2 })]);
    }

    #[test]
    fn jsonl_reports_line_number() {
        let err = parse_jsonl::<Row>("{\"a\":1}\nnot json\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
