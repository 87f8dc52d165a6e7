use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Rectangular numeric table written as CSV. Missing values are empty cells.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub title: String,
    /// Column names with a short description for the header comment.
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl CsvTable {
    pub fn new(title: impl Into<String>, columns: &[(&str, &str)]) -> Self {
        CsvTable {
            title: title.into(),
            columns: columns
                .iter()
                .map(|(n, d)| (n.to_string(), d.to_string()))
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn push_row(&mut self, row: Vec<Option<f64>>) -> Result<()> {
        if row.len() != self.width() {
            return Err(Error::Internal(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.width()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.columns.iter().position(|(n, _)| n == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    fn comment_line(&self) -> String {
        let cols: Vec<String> = self
            .columns
            .iter()
            .map(|(n, d)| format!("{n} = {d}"))
            .collect();
        format!("# {}; columns: {}", self.title, cols.join("; "))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.comment_line().replace('\n', " "))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.column_names())?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.map(format_number).unwrap_or_default()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        self.write_to(file)
    }
}

/// Decimal rendering with 12 significant digits. Trailing zeros are dropped,
/// very large or small magnitudes fall back to exponent notation, NaN becomes
/// an empty cell.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Let the formatter do the rounding, then re-place the decimal point.
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    if !(-6..=15).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        return if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        };
    }
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{int}.{frac}")
    };
    format!("{sign}{body}")
}
