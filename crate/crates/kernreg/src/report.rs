//! Number formatting and CSV tables.

use std::path::Path;

use crate::error::{Error, Result};

/// Significant digits for general numeric output.
pub const NUMBER_DIGITS: usize = 9;
/// Significant digits for transform entries.
pub const TRANSFORM_DIGITS: usize = 12;

/// Shortest decimal form of `v` rounded to `digits` significant digits, or
/// of `v` itself when `digits` is `None`. Negative zero prints as `0`.
pub fn format_number(v: f64, digits: Option<usize>) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded = match digits {
        Some(d) => format!("{:.*e}", d.max(1) - 1, v).parse::<f64>().expect("formatted float parses"),
        None => v,
    };
    rounded.to_string()
}

/// A header plus rows of cells, rendered as comma-separated text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// Appends a row of numbers at [`NUMBER_DIGITS`].
    pub fn push_numbers(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|&v| format_number(v, Some(NUMBER_DIGITS))).collect());
    }

    pub fn push(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_number(1.0 / 3.0, Some(9)), "0.333333333");
        assert_eq!(format_number(123456789012.0, Some(9)), "123456789000");
        assert_eq!(format_number(-0.0, Some(9)), "0");
        assert_eq!(format_number(1.0, Some(12)), "1");
        assert_eq!(format_number(2.5e-12, Some(9)), "0.0000000000025");
        assert_eq!(format_number(0.1, None), "0.1");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push_numbers(&[1.0, 0.5]);
        assert_eq!(t.to_csv(), "a,b\n1,0.5\n");
    }
}
