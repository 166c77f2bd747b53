use std::str::FromStr;

use crate::error::{Error, Result};

/// Cursor over the meaningful lines of a text file, tracking 1-based line
/// numbers for error messages.
pub(crate) struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate().peekable(),
            last_line: 0,
        }
    }

    fn skip_blank(&mut self) {
        while let Some((_, l)) = self.inner.peek() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                self.inner.next();
            } else {
                break;
            }
        }
    }

    /// Next non-blank line as `(line number, trimmed text)`.
    pub(crate) fn next_line(&mut self) -> Option<(usize, &'a str)> {
        self.skip_blank();
        let (i, l) = self.inner.next()?;
        self.last_line = i + 1;
        Some((i + 1, l.trim()))
    }

    pub(crate) fn peek_line(&mut self) -> Option<(usize, &'a str)> {
        self.skip_blank();
        self.inner.peek().map(|&(i, l)| (i + 1, l.trim()))
    }

    pub(crate) fn require(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_line()
            .ok_or_else(|| Error::parse(self.last_line + 1, format!("unexpected end of file, expected {what}")))
    }

    /// Reads a `key value...` line and returns the tokens after the key.
    pub(crate) fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.require(&format!("`{key}`"))?;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some(k) if k == key => Ok((n, tokens.collect())),
            Some(k) => Err(Error::parse(n, format!("expected `{key}`, found `{k}`"))),
            None => unreachable!("blank lines are skipped"),
        }
    }

    /// Reads `key <value>` with exactly one value.
    pub(crate) fn keyed_value<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let (n, rest) = self.keyed(key)?;
        match rest.as_slice() {
            [v] => parse_token(n, v, key),
            _ => Err(Error::parse(n, format!("`{key}` takes exactly one value"))),
        }
    }

    pub(crate) fn line_number(&self) -> usize {
        self.last_line
    }
}

pub(crate) fn parse_token<T: FromStr>(line: usize, token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{token}`")))
}

/// Parses a finite float; the formats never carry NaN or infinities except
/// where a caller handles them explicitly.
pub(crate) fn parse_finite(line: usize, token: &str, what: &str) -> Result<f64> {
    let v: f64 = parse_token(line, token, what)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(line, format!("{what} `{token}` is not finite")))
    }
}

/// Shortest representation that parses back to the same bits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
