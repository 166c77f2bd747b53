//! Rendering batch reports.
//!
//! The record format is line-oriented with tab-separated fields and a fixed
//! column order per record kind (shown here with spaces):
//!
//! ```text
//! treecert-records 1
//! item <id> <verdict> <wall ns> <refinements> <max depth> <checker calls> <witness> <message>
//! warning <message>
//! summary <verified> <falsified> <timeout> <errors> <wall ns> <peak depth>
//! ```
//!
//! `<verdict>` is one of `verified`, `falsified`, `timeout`, `error`. The
//! witness is a comma-separated vector or `-`; the message is `-` unless the
//! verdict is `error`. Messages escape backslash, tab and newline.

use std::io;
use std::time::Duration;

use treecert_core::TransformStats;

use crate::error::{Error, Result};
use crate::format::lines::{fmt_f64, parse_finite, parse_token};
use crate::parallel::{BatchReport, ItemReport, ItemVerdict, Summary};

const HEADER: &str = "treecert-records\t1";

/// Which kind of batch a report describes; only affects human wording.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchKind {
    Robustness,
    Property,
}

fn verdict_word(v: &ItemVerdict) -> &'static str {
    match v {
        ItemVerdict::Verified => "verified",
        ItemVerdict::Falsified => "falsified",
        ItemVerdict::Timeout => "timeout",
        ItemVerdict::Error(_) => "error",
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ")
}

pub fn render_human(report: &BatchReport, kind: BatchKind) -> String {
    let mut out = Vec::new();
    write_human(&mut out, report, kind).expect("writing to memory cannot fail");
    String::from_utf8(out).expect("reports are UTF-8")
}

pub fn write_human(out: &mut impl io::Write, report: &BatchReport, kind: BatchKind) -> io::Result<()> {
    let label = match kind {
        BatchKind::Robustness => "sample",
        BatchKind::Property => "region",
    };
    for item in &report.items {
        write!(
            out,
            "{label} {}: {} ({:.6} s, {} refinements)",
            item.id,
            verdict_word(&item.verdict),
            item.wall.as_secs_f64(),
            item.stats.refinement_count
        )?;
        if let Some(w) = &item.witness {
            write!(out, " witness [{}]", fmt_vec(w))?;
        }
        if let ItemVerdict::Error(msg) = &item.verdict {
            write!(out, ": {msg}")?;
        }
        writeln!(out)?;
    }
    for w in &report.warnings {
        writeln!(out, "warning: {w}")?;
    }
    let s = &report.summary;
    match kind {
        BatchKind::Robustness => {
            writeln!(
                out,
                "summary: {} robust, {} not robust, {} unsolved, {} errors; elapsed {:.3} s; peak depth {}",
                s.verified,
                s.falsified,
                s.timeout,
                s.errors,
                s.wall.as_secs_f64(),
                s.peak_depth
            )?;
        }
        BatchKind::Property => {
            let outcome = if s.falsified > 0 {
                "Fail"
            } else if s.errors > 0 {
                "Error"
            } else if s.timeout > 0 {
                "Timeout"
            } else {
                "Pass"
            };
            writeln!(
                out,
                "property: {outcome}; elapsed {:.3} s; {} regions, peak depth {}",
                s.wall.as_secs_f64(),
                report.items.len(),
                s.peak_depth
            )?;
        }
    }
    Ok(())
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            out.push(match chars.next()? {
                '\\' => '\\',
                't' => '\t',
                'n' => '\n',
                _ => return None,
            });
        } else {
            out.push(c);
        }
    }
    Some(out)
}

pub fn render_records(report: &BatchReport) -> String {
    let mut out = Vec::new();
    write_records(&mut out, report).expect("writing to memory cannot fail");
    String::from_utf8(out).expect("reports are UTF-8")
}

pub fn write_records(out: &mut impl io::Write, report: &BatchReport) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for item in &report.items {
        let witness = item.witness.as_ref().map_or_else(
            || "-".to_string(),
            |w| w.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(","),
        );
        let message = match &item.verdict {
            ItemVerdict::Error(msg) => escape(msg),
            _ => "-".to_string(),
        };
        writeln!(
            out,
            "item\t{}\t{}\t{}\t{}\t{}\t{}\t{witness}\t{message}",
            item.id,
            verdict_word(&item.verdict),
            item.wall.as_nanos(),
            item.stats.refinement_count,
            item.stats.max_recursion_depth,
            item.stats.checker_calls,
        )?;
    }
    for w in &report.warnings {
        writeln!(out, "warning\t{}", escape(w))?;
    }
    let s = &report.summary;
    writeln!(
        out,
        "summary\t{}\t{}\t{}\t{}\t{}\t{}",
        s.verified,
        s.falsified,
        s.timeout,
        s.errors,
        s.wall.as_nanos(),
        s.peak_depth
    )?;
    Ok(())
}

fn nanos(line: usize, token: &str) -> Result<Duration> {
    let n: u64 = parse_token(line, token, "duration")?;
    Ok(Duration::from_nanos(n))
}

pub fn parse_records(text: &str) -> Result<BatchReport> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, HEADER)) => {}
        _ => return Err(Error::parse(1, format!("expected `{}`", HEADER.replace('\t', " ")))),
    }
    let mut report = BatchReport::default();
    let mut summary = None;
    for (n, line) in lines {
        if summary.is_some() {
            return Err(Error::parse(n, "content after the summary record"));
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["item", id, verdict, wall, refinements, depth, calls, witness, message] => {
                let verdict = match (*verdict, *message) {
                    ("verified", "-") => ItemVerdict::Verified,
                    ("falsified", "-") => ItemVerdict::Falsified,
                    ("timeout", "-") => ItemVerdict::Timeout,
                    ("error", msg) => {
                        ItemVerdict::Error(unescape(msg).ok_or_else(|| Error::parse(n, "bad escape in message"))?)
                    }
                    _ => return Err(Error::parse(n, format!("invalid verdict `{verdict}` or message"))),
                };
                let witness = match *witness {
                    "-" => None,
                    w => Some(
                        w.split(',')
                            .map(|x| parse_finite(n, x, "witness coordinate"))
                            .collect::<Result<Vec<f64>>>()?,
                    ),
                };
                report.items.push(ItemReport {
                    id: parse_token(n, id, "item id")?,
                    verdict,
                    wall: nanos(n, wall)?,
                    stats: TransformStats {
                        refinement_count: parse_token(n, refinements, "refinement count")?,
                        max_recursion_depth: parse_token(n, depth, "depth")?,
                        checker_calls: parse_token(n, calls, "checker calls")?,
                    },
                    witness,
                });
            }
            ["warning", msg] => report
                .warnings
                .push(unescape(msg).ok_or_else(|| Error::parse(n, "bad escape in warning"))?),
            ["summary", verified, falsified, timeout, errors, wall, depth] => {
                summary = Some(Summary {
                    verified: parse_token(n, verified, "count")?,
                    falsified: parse_token(n, falsified, "count")?,
                    timeout: parse_token(n, timeout, "count")?,
                    errors: parse_token(n, errors, "count")?,
                    wall: nanos(n, wall)?,
                    peak_depth: parse_token(n, depth, "depth")?,
                });
            }
            _ => return Err(Error::parse(n, format!("unrecognised record `{}`", fields[0]))),
        }
    }
    report.summary = summary.ok_or_else(|| Error::parse(text.lines().count() + 1, "missing summary record"))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> BatchReport {
        let stats = TransformStats {
            refinement_count: 12,
            max_recursion_depth: 3,
            checker_calls: 13,
        };
        BatchReport {
            items: vec![
                ItemReport {
                    id: 0,
                    verdict: ItemVerdict::Verified,
                    wall: Duration::from_nanos(1_234_567),
                    stats,
                    witness: None,
                },
                ItemReport {
                    id: 1,
                    verdict: ItemVerdict::Falsified,
                    wall: Duration::from_nanos(42),
                    stats,
                    witness: Some(vec![0.1, -2.5e-300, 1.0]),
                },
                ItemReport {
                    id: 2,
                    verdict: ItemVerdict::Error("label 9 out of range\tfor\n2 \\ outputs".into()),
                    wall: Duration::ZERO,
                    stats: TransformStats::default(),
                    witness: None,
                },
                ItemReport {
                    id: 3,
                    verdict: ItemVerdict::Timeout,
                    wall: Duration::from_secs(60),
                    stats,
                    witness: None,
                },
            ],
            summary: Summary {
                verified: 1,
                falsified: 1,
                timeout: 1,
                errors: 1,
                wall: Duration::from_nanos(60_001_234_609),
                peak_depth: 3,
            },
            warnings: vec!["split\tpartially".into()],
        }
    }

    #[test]
    fn records_round_trip_losslessly() {
        let r = sample_report();
        let text = render_records(&r);
        assert_eq!(parse_records(&text).unwrap(), r);
        assert!(text.lines().all(|l| !l.is_empty()));
    }

    #[test]
    fn rejects_bad_records() {
        let text = render_records(&sample_report());
        assert!(parse_records(&text.replace("treecert-records", "records")).is_err());
        assert!(parse_records(&text.replace("\tverified\t", "\tmaybe\t")).is_err());
        let no_summary: String = text
            .lines()
            .filter(|l| !l.starts_with("summary"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(parse_records(&no_summary).is_err());
    }

    #[test]
    fn human_summary_counts_unsolved() {
        let text = render_human(&sample_report(), BatchKind::Robustness);
        assert!(text.contains("1 robust, 1 not robust, 1 unsolved, 1 errors"), "{text}");
        assert!(text.contains("witness [0.1, -2.5e-300, 1.0]"), "{text}");
        let text = render_human(&sample_report(), BatchKind::Property);
        assert!(text.contains("property: Fail"), "{text}");
    }
}
