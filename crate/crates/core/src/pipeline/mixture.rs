use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A corpus file and the number of bytes to take from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSource {
    pub path: PathBuf,
    pub budget: u64,
}

/// Parse `123`, `64K`, `100MB`, `1GB`, `2MiB`...; decimal units are powers of
/// 1000, `*iB` units powers of 1024.
pub fn parse_budget(s: &str) -> Result<u64> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (digits, unit) = s.split_at(split);
    let n: u64 = digits
        .parse()
        .map_err(|_| Error::Config(format!("bad byte budget {s:?}")))?;
    let scale: u64 = match unit.to_ascii_uppercase().as_str() {
        "" | "B" => 1,
        "K" | "KB" => 1_000,
        "M" | "MB" => 1_000_000,
        "G" | "GB" => 1_000_000_000,
        "KIB" => 1 << 10,
        "MIB" => 1 << 20,
        "GIB" => 1 << 30,
        _ => return Err(Error::Config(format!("bad byte budget unit {unit:?}"))),
    };
    n.checked_mul(scale)
        .ok_or_else(|| Error::Config(format!("byte budget {s:?} overflows")))
}

impl FromStr for CorpusSource {
    type Err = Error;

    /// `path=BUDGET`; a bare path takes the whole file.
    fn from_str(s: &str) -> Result<Self> {
        match s.rsplit_once('=') {
            Some((path, budget)) if !path.is_empty() => Ok(Self {
                path: PathBuf::from(path),
                budget: parse_budget(budget)?,
            }),
            _ => Ok(Self {
                path: PathBuf::from(s),
                budget: u64::MAX,
            }),
        }
    }
}

impl fmt::Display for CorpusSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.budget == u64::MAX {
            write!(f, "{}", self.path.display())
        } else {
            write!(f, "{}={}", self.path.display(), self.budget)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureEntry {
    pub file: PathBuf,
    pub budget: u64,
    pub bytes_used: u64,
    pub lines: u64,
}

/// Feed each source's lines to `sink`, in order, stopping a file before the
/// first line (newline included) that would exceed its budget.
pub fn stream_mixture<F>(sources: &[CorpusSource], mut sink: F) -> Result<Vec<MixtureEntry>>
where
    F: FnMut(&str),
{
    let mut manifest = Vec::with_capacity(sources.len());
    for src in sources {
        let file = File::open(&src.path).map_err(|e| Error::io(&src.path, e))?;
        let mut reader = BufReader::new(file);
        let mut buf = Vec::new();
        let (mut used, mut lines) = (0u64, 0u64);
        loop {
            buf.clear();
            let n = reader
                .read_until(b'\n', &mut buf)
                .map_err(|e| Error::io(&src.path, e))? as u64;
            if n == 0 || used + n > src.budget {
                break;
            }
            let line = std::str::from_utf8(&buf).map_err(|e| Error::Encoding {
                offset: used as usize + e.valid_up_to(),
                message: format!("{}: {e}", src.path.display()),
            })?;
            sink(line.trim_end_matches(['\n', '\r']));
            used += n;
            lines += 1;
        }
        manifest.push(MixtureEntry {
            file: src.path.clone(),
            budget: src.budget,
            bytes_used: used,
            lines,
        });
    }
    Ok(manifest)
}

/// Collect a mixture in memory.
pub fn build_mixture(sources: &[CorpusSource]) -> Result<(Vec<String>, Vec<MixtureEntry>)> {
    let mut lines = Vec::new();
    let manifest = stream_mixture(sources, |l| lines.push(l.to_string()))?;
    Ok((lines, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn budgets() {
        assert_eq!(parse_budget("100MB").unwrap(), 100_000_000);
        assert_eq!(parse_budget("1GB").unwrap(), 1_000_000_000);
        assert_eq!(parse_budget("2MiB").unwrap(), 2 << 20);
        assert_eq!(parse_budget("17").unwrap(), 17);
        assert!(parse_budget("x").is_err());
        assert!(parse_budget("5XB").is_err());
        let s: CorpusSource = "data/a=b.txt=1K".parse().unwrap();
        assert_eq!(s.path, PathBuf::from("data/a=b.txt"));
        assert_eq!(s.budget, 1000);
    }

    #[test]
    fn truncates_at_line_boundaries() {
        let f = file("aaaa\nbbbb\ncccc\n");
        let src = |budget| CorpusSource {
            path: f.path().into(),
            budget,
        };
        let (lines, m) = build_mixture(&[src(0)]).unwrap();
        assert!(lines.is_empty());
        assert_eq!(m[0].bytes_used, 0);
        let (lines, m) = build_mixture(&[src(12)]).unwrap();
        assert_eq!(lines, vec!["aaaa", "bbbb"]);
        assert_eq!((m[0].bytes_used, m[0].lines), (10, 2));
        let (lines, m) = build_mixture(&[src(u64::MAX)]).unwrap();
        assert_eq!(lines.len(), 3);
        assert_eq!(m[0].bytes_used, 15);
    }

    #[test]
    fn concatenates_in_order_and_reports_missing_files() {
        let a = file("one\n");
        let b = file("two\nthree");
        let srcs = [
            CorpusSource {
                path: b.path().into(),
                budget: u64::MAX,
            },
            CorpusSource {
                path: a.path().into(),
                budget: u64::MAX,
            },
        ];
        let (lines, _) = build_mixture(&srcs).unwrap();
        assert_eq!(lines, vec!["two", "three", "one"]);
        let missing = CorpusSource {
            path: "/nonexistent/x.txt".into(),
            budget: 1,
        };
        let err = build_mixture(&[missing]).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.txt"));
    }
}
