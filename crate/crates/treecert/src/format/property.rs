//! Property files.
//!
//! ```text
//! treecert-property 1
//! features 2
//! interpretation argmax
//! input 0 (0.0, 2.0]
//! input 1 [-1.0, +inf)
//! assert or(class_in(0, 2),
//!           and(score_ge(1, 0.25), dominates(1, 3)))
//! ```
//!
//! Inputs not listed are unbounded. Brackets mark inclusive endpoints and
//! parentheses exclusive ones; infinite endpoints are always exclusive.
//! `interpretation` is `argmax` (scores seen before an argmax-invariant
//! softmax) or `scores` (the model's post-processed output). The assertion
//! may span several lines and must come last. Classes are 0-based.
//!
//! | atom | meaning |
//! |------|---------|
//! | `class_in(c, ...)` | predicted class is one of the listed classes |
//! | `score_le(c, b)` / `score_ge(c, b)` | output component `c` is `<= b` / `>= b` |
//! | `dominates(a, b)` | output `a` is strictly greater than output `b` |
//! | `and(...)` / `or(...)` | Kleene conjunction / disjunction |

use std::fmt::Write as _;
use std::path::Path;

use treecert_core::{Assertion, HyperRect, Interval, OutputSemantics, PropertySpec};

use super::lines::{fmt_f64, parse_token, Lines};
use super::model::{read_magic, VERSION};
use crate::error::{Error, Result};

pub const MAGIC: &str = "treecert-property";

pub fn parse(text: &str) -> Result<PropertySpec> {
    let mut lines = Lines::new(text);
    read_magic(&mut lines, MAGIC)?;
    let n_features: usize = lines.keyed_value("features")?;
    if n_features == 0 {
        return Err(Error::parse(
            lines.line_number(),
            "properties need at least one feature",
        ));
    }
    let (n, rest) = lines.keyed("interpretation")?;
    let interpretation = match rest.as_slice() {
        ["argmax"] => OutputSemantics::Argmax,
        ["scores"] => OutputSemantics::Scores,
        _ => return Err(Error::parse(n, "interpretation must be `argmax` or `scores`")),
    };
    let mut dims = vec![Interval::UNBOUNDED; n_features];
    let mut seen = vec![false; n_features];
    while let Some((n, line)) = lines.peek_line() {
        let Some(rest) = line.strip_prefix("input") else { break };
        lines.next_line();
        let rest = rest.trim_start();
        let (index, interval) = rest
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::parse(n, "expected `input <feature> <interval>`"))?;
        let index: usize = parse_token(n, index, "feature index")?;
        if index >= n_features {
            return Err(Error::parse(
                n,
                format!("input {index} out of range for {n_features} features"),
            ));
        }
        if std::mem::replace(&mut seen[index], true) {
            return Err(Error::parse(n, format!("input {index} given twice")));
        }
        let iv = parse_interval(interval).map_err(|m| Error::parse(n, m))?;
        if iv.is_empty() {
            return Err(Error::parse(n, format!("input {index} is empty")));
        }
        dims[index] = iv;
    }
    let (start, first) = lines.require("`assert`")?;
    let Some(body) = first.strip_prefix("assert") else {
        return Err(Error::parse(start, format!("expected `assert`, found `{first}`")));
    };
    let mut text = body.to_string();
    while depth(&text) > 0 {
        match lines.next_line() {
            Some((_, more)) => {
                text.push(' ');
                text.push_str(more);
            }
            None => break,
        }
    }
    let assertion = parse_assertion(&text).map_err(|m| Error::parse(start, m))?;
    if let Some((n, extra)) = lines.next_line() {
        return Err(Error::parse(
            n,
            format!("trailing content after the assertion: `{extra}`"),
        ));
    }
    Ok(PropertySpec::new(HyperRect::new(dims), assertion, interpretation))
}

fn depth(text: &str) -> i64 {
    text.chars()
        .map(|c| match c {
            '(' => 1,
            ')' => -1,
            _ => 0,
        })
        .sum()
}

fn parse_bound(s: &str) -> Result<f64, String> {
    match s.trim() {
        "-inf" => Ok(f64::NEG_INFINITY),
        "inf" | "+inf" => Ok(f64::INFINITY),
        t => t
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("invalid interval endpoint `{t}`")),
    }
}

pub fn parse_interval(s: &str) -> Result<Interval, String> {
    let s = s.trim();
    let lo_closed = match s.chars().next() {
        Some('[') => true,
        Some('(') => false,
        _ => return Err(format!("interval `{s}` must start with `[` or `(`")),
    };
    let hi_closed = match s.chars().last() {
        Some(']') => true,
        Some(')') => false,
        _ => return Err(format!("interval `{s}` must end with `]` or `)`")),
    };
    let inner = &s[1..s.len() - 1];
    let (lo, hi) = inner
        .split_once(',')
        .ok_or_else(|| format!("interval `{s}` needs two comma-separated endpoints"))?;
    let (lo, hi) = (parse_bound(lo)?, parse_bound(hi)?);
    if lo_closed && lo.is_infinite() || hi_closed && hi.is_infinite() {
        return Err(format!("infinite endpoints must be exclusive in `{s}`"));
    }
    Ok(Interval::new(lo, lo_closed, hi, hi_closed))
}

pub fn format_interval(iv: &Interval) -> String {
    let bound = |v: f64| {
        if v == f64::INFINITY {
            "+inf".to_string()
        } else if v == f64::NEG_INFINITY {
            "-inf".to_string()
        } else {
            fmt_f64(v)
        }
    };
    format!(
        "{}{}, {}{}",
        if iv.lo_closed() { '[' } else { '(' },
        bound(iv.lo()),
        bound(iv.hi()),
        if iv.hi_closed() { ']' } else { ')' }
    )
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(String),
    Open,
    Close,
    Comma,
}

fn tokenize(s: &str) -> Result<Vec<Token>, String> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' | ')' | ',' => {
                chars.next();
                out.push(match c {
                    '(' => Token::Open,
                    ')' => Token::Close,
                    _ => Token::Comma,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek().filter(|c| c.is_ascii_alphanumeric() || **c == '_') {
                    word.push(c);
                    chars.next();
                }
                out.push(Token::Ident(word));
            }
            c if c.is_ascii_digit() || matches!(c, '-' | '+' | '.') => {
                let mut num = String::new();
                while let Some(&c) = chars
                    .peek()
                    .filter(|c| c.is_ascii_alphanumeric() || matches!(**c, '-' | '+' | '.'))
                {
                    num.push(c);
                    chars.next();
                }
                out.push(Token::Number(num));
            }
            other => return Err(format!("unexpected character `{other}` in assertion")),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token) -> Result<(), String> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(format!("expected {want:?}, found {t:?}")),
            None => Err(format!("expected {want:?}, found end of assertion")),
        }
    }

    /// Comma-separated arguments up to the closing parenthesis.
    fn args<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, String>) -> Result<Vec<T>, String> {
        self.expect(Token::Open)?;
        let mut out = vec![item(self)?];
        loop {
            match self.next() {
                Some(Token::Comma) => out.push(item(self)?),
                Some(Token::Close) => return Ok(out),
                other => return Err(format!("expected `,` or `)`, found {other:?}")),
            }
        }
    }

    fn number(&mut self) -> Result<String, String> {
        match self.next() {
            Some(Token::Number(n)) => Ok(n),
            other => Err(format!("expected a number, found {other:?}")),
        }
    }

    fn class(&mut self) -> Result<usize, String> {
        let n = self.number()?;
        n.parse().map_err(|_| format!("invalid class index `{n}`"))
    }

    fn bound(&mut self) -> Result<f64, String> {
        let n = self.number()?;
        n.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("invalid score bound `{n}`"))
    }

    fn pair<T>(&mut self, mut first: impl FnMut(&mut Self) -> Result<T, String>) -> Result<(T, T), String> {
        self.expect(Token::Open)?;
        let a = first(self)?;
        self.expect(Token::Comma)?;
        let b = first(self)?;
        self.expect(Token::Close)?;
        Ok((a, b))
    }

    fn assertion(&mut self) -> Result<Assertion, String> {
        let name = match self.next() {
            Some(Token::Ident(name)) => name,
            other => return Err(format!("expected an assertion, found {other:?}")),
        };
        match name.as_str() {
            "class_in" => Ok(Assertion::ClassIn(self.args(Self::class)?)),
            "score_le" | "score_ge" => {
                self.expect(Token::Open)?;
                let class = self.class()?;
                self.expect(Token::Comma)?;
                let bound = self.bound()?;
                self.expect(Token::Close)?;
                Ok(if name == "score_le" {
                    Assertion::ScoreLe { class, bound }
                } else {
                    Assertion::ScoreGe { class, bound }
                })
            }
            "dominates" => {
                let (winner, loser) = self.pair(Self::class)?;
                Ok(Assertion::Dominates { winner, loser })
            }
            "and" => Ok(Assertion::And(self.args(Self::assertion)?)),
            "or" => Ok(Assertion::Or(self.args(Self::assertion)?)),
            other => Err(format!("unknown assertion `{other}`")),
        }
    }
}

pub fn parse_assertion(text: &str) -> Result<Assertion, String> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let a = p.assertion()?;
    if p.pos < p.tokens.len() {
        return Err(format!("unexpected {:?} after the assertion", p.tokens[p.pos]));
    }
    Ok(a)
}

pub fn format_assertion(a: &Assertion) -> String {
    let join = |parts: &[Assertion]| parts.iter().map(format_assertion).collect::<Vec<_>>().join(", ");
    match a {
        Assertion::ClassIn(cs) => format!(
            "class_in({})",
            cs.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
        ),
        Assertion::ScoreLe { class, bound } => format!("score_le({class}, {})", fmt_f64(*bound)),
        Assertion::ScoreGe { class, bound } => format!("score_ge({class}, {})", fmt_f64(*bound)),
        Assertion::Dominates { winner, loser } => format!("dominates({winner}, {loser})"),
        Assertion::And(parts) => format!("and({})", join(parts)),
        Assertion::Or(parts) => format!("or({})", join(parts)),
    }
}

pub fn serialize(spec: &PropertySpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "features {}", spec.input.dim());
    let interp = match spec.interpretation {
        OutputSemantics::Argmax => "argmax",
        OutputSemantics::Scores => "scores",
    };
    let _ = writeln!(out, "interpretation {interp}");
    for (i, iv) in spec.input.intervals().iter().enumerate() {
        if *iv != Interval::UNBOUNDED {
            let _ = writeln!(out, "input {i} {}", format_interval(iv));
        }
    }
    let _ = writeln!(out, "assert {}", format_assertion(&spec.assertion));
    out
}

pub fn read(path: &Path) -> Result<PropertySpec> {
    parse(&super::read_text(path)?).map_err(|e| e.in_file(path))
}
