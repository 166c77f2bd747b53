//! Dataset files: a `features <n>` header, then one sample per line with
//! the label first and the `n` feature values after it.
//!
//! ```text
//! features 2
//! 0 1.5 -3.0
//! 1 0.25 7.0
//! ```

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::lines::{fmt_f64, parse_finite, parse_token};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub label: usize,
    pub features: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n_features: usize,
    pub samples: Vec<Sample>,
}

pub fn parse(text: &str) -> Result<Dataset> {
    parse_lines(text.lines().map(|l| Ok(l.to_string())))
}

/// Parses records one line at a time so a file is never held in memory
/// alongside its parsed samples.
fn parse_lines(lines: impl Iterator<Item = Result<String>>) -> Result<Dataset> {
    let mut n_features = None;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let (n, line) = (i + 1, line?);
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let Some(width) = n_features else {
            n_features = match (tokens.next(), tokens.next(), tokens.next()) {
                (Some("features"), Some(v), None) => match parse_token::<usize>(n, v, "feature count")? {
                    0 => return Err(Error::parse(n, "datasets need at least one feature")),
                    v => Some(v),
                },
                _ => return Err(Error::parse(n, "expected `features <n>`")),
            };
            continue;
        };
        let label: usize = parse_token(n, tokens.next().unwrap_or_default(), "label")?;
        let features = tokens
            .map(|t| parse_finite(n, t, "feature value"))
            .collect::<Result<Vec<f64>>>()?;
        if features.len() != width {
            return Err(Error::parse(
                n,
                format!("sample has {} features, expected {width}", features.len()),
            ));
        }
        samples.push(Sample { label, features });
    }
    let n_features = n_features.ok_or_else(|| Error::parse(1, "expected `features <n>`"))?;
    Ok(Dataset { n_features, samples })
}

pub fn serialize(data: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "features {}", data.n_features);
    for s in &data.samples {
        let _ = write!(out, "{}", s.label);
        for v in &s.features {
            let _ = write!(out, " {}", fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn read(path: &Path) -> Result<Dataset> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io)?;
    parse_lines(BufReader::new(file).lines().map(|l| l.map_err(io))).map_err(|e| e.in_file(path))
}

pub fn write(path: &Path, data: &Dataset) -> Result<()> {
    super::write_text(path, &serialize(data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "features 2\n0 1.5 -3.0\n# comment\n1 0.1 7.0\n";
        let d = parse(text).unwrap();
        assert_eq!(d.samples.len(), 2);
        assert_eq!(
            d.samples[1],
            Sample {
                label: 1,
                features: vec![0.1, 7.0]
            }
        );
        assert_eq!(serialize(&d), text.replace("# comment\n", ""));
    }

    #[test]
    fn rejects_wrong_width_and_bad_labels() {
        let err = parse("features 2\n0 1.0\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(parse("features 2\n-1 1.0 2.0\n").is_err());
        assert!(parse("features 2\n0 1.0 nan\n").is_err());
        assert!(parse("0 1.0 2.0\n").is_err());
    }
}
