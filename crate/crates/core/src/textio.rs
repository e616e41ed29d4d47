//! Helpers shared by the line-oriented file formats.

use std::str::FromStr;

use crate::error::{Error, Result};

/// Non-empty, non-comment lines with their 1-based line numbers.
pub fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_field<T: FromStr>(field: &str, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse `{field}`"),
    })
}
