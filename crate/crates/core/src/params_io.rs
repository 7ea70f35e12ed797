//! Shared text encoding for parameter files: one `[name rows cols]`
//! section per tensor, rows on separate lines, values in scientific
//! notation with 17 significant digits so parsing restores every bit.

use crate::error::{Error, Result};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn write_tensor(out: &mut String, name: &str, rows: usize, cols: usize, data: &[f64]) {
    debug_assert_eq!(data.len(), rows * cols);
    out.push_str(&format!("[{name} {rows} {cols}]\n"));
    for r in 0..rows {
        let line: Vec<String> = data[r * cols..(r + 1) * cols]
            .iter()
            .map(|x| fmt_f64(*x))
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

/// Line cursor over a parameter file that reports 1-based line numbers.
pub(crate) struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    pub fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate().peekable(),
        }
    }

    pub fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::format("unexpected end of file"))
    }

    pub fn peek(&mut self) -> Option<&'a str> {
        self.inner.peek().map(|(_, l)| *l)
    }

    pub fn at_end(&mut self) -> bool {
        while let Some(l) = self.peek() {
            if !l.trim().is_empty() {
                return false;
            }
            self.inner.next();
        }
        true
    }

    /// `key value` line; returns the value text.
    pub fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next_line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok((n, v.trim())),
            _ => Err(Error::format_at(n, format!("expected `{key} ...`"))),
        }
    }

    pub fn tensor(&mut self, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>> {
        let (n, header) = self.next_line()?;
        let expected = format!("[{name} {rows} {cols}]");
        if header.trim() != expected {
            return Err(Error::format_at(
                n,
                format!("expected section `{expected}`"),
            ));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (n, line) = self.next_line()?;
            let before = data.len();
            for field in line.split_whitespace() {
                let x: f64 = field
                    .parse()
                    .map_err(|_| Error::format_at(n, format!("bad number `{field}`")))?;
                if !x.is_finite() {
                    return Err(Error::format_at(n, "non-finite parameter"));
                }
                data.push(x);
            }
            if data.len() - before != cols {
                return Err(Error::format_at(
                    n,
                    format!("expected {cols} values, found {}", data.len() - before),
                ));
            }
        }
        Ok(data)
    }
}

pub(crate) fn parse_usize(line: usize, field: &str) -> Result<usize> {
    field
        .parse()
        .map_err(|_| Error::format_at(line, format!("expected an integer, got `{field}`")))
}
