//! CSV with `# key=value` metadata lines, one header row and numeric rows.

use std::fmt::Write as _;

/// Numeric table; matrices are stored long-form as (row, col, value) columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDocument {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CsvError {
    #[error("missing header row")]
    NoHeader,
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}, column `{column}`: not a number: `{value}`")]
    NotANumber { row: usize, column: String, value: String },
    #[error("no column named `{0}`")]
    NoColumn(String),
    #[error("{0}")]
    Csv(String),
}

/// 17 significant digits: enough for any f64 to round-trip.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

impl CsvDocument {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn from_columns(names: &[&str], data: &[&[f64]]) -> Self {
        let mut doc = Self::new(names);
        let n = data.first().map_or(0, |c| c.len());
        doc.rows = (0..n).map(|k| data.iter().map(|c| c[k]).collect()).collect();
        doc
    }

    /// Long-form matrix: `values[i][j]` at (`rows[i]`, `cols[j]`).
    pub fn long_form(names: [&str; 3], rows: &[f64], cols: &[f64], values: &[Vec<f64>]) -> Self {
        let mut doc = Self::new(&names);
        for (r, line) in rows.iter().zip(values) {
            for (c, v) in cols.iter().zip(line) {
                doc.rows.push(vec![*r, *c, *v]);
            }
        }
        doc
    }

    pub fn push_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string().replace('\n', " ");
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, CsvError> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CsvError::NoColumn(name.to_string()))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CsvError> {
        let mut meta = Vec::new();
        for line in text.lines() {
            let Some(rest) = line.strip_prefix('#') else {
                continue;
            };
            if let Some((k, v)) = rest.trim_start().split_once('=') {
                meta.push((k.trim().to_string(), v.to_string()));
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| CsvError::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if columns.is_empty() || columns.iter().all(String::is_empty) {
            return Err(CsvError::NoHeader);
        }
        let mut rows = Vec::new();
        for (k, record) in reader.records().enumerate() {
            let record = record.map_err(|e| CsvError::Csv(e.to_string()))?;
            if record.len() != columns.len() {
                return Err(CsvError::Ragged {
                    row: k + 1,
                    expected: columns.len(),
                    found: record.len(),
                });
            }
            let row = record
                .iter()
                .zip(&columns)
                .map(|(cell, col)| {
                    cell.parse::<f64>().map_err(|_| CsvError::NotANumber {
                        row: k + 1,
                        column: col.clone(),
                        value: cell.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Self { meta, columns, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_lossless(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..60)) {
            let mut doc = CsvDocument::from_columns(&["x", "y"], &[&values, &values]);
            doc.push_meta("config_hash", "abc");
            let back = CsvDocument::parse(&doc.render()).unwrap();
            prop_assert_eq!(back, doc);
        }
    }

    #[test]
    fn long_form_layout() {
        let doc = CsvDocument::long_form(["r", "c", "v"], &[0.0, 1.0], &[5.0, 6.0], &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(doc.rows[1], vec![0.0, 6.0, 2.0]);
        assert_eq!(doc.rows.len(), 4);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(matches!(CsvDocument::parse("a,b\n1,2\n3\n"), Err(CsvError::Ragged { .. })));
        assert!(matches!(CsvDocument::parse("a,b\n1,x\n"), Err(CsvError::NotANumber { .. })));
    }
}
