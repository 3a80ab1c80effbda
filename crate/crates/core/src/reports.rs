//! Result tables rendered as CSV and as aligned text.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnGroup {
    /// Spanning label; empty for ungrouped columns.
    pub label: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub labels: Vec<String>,
    /// F1 in `[0, 1]`; `None` renders as an empty cell.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub title: String,
    pub row_header: Vec<String>,
    pub groups: Vec<ColumnGroup>,
    pub rows: Vec<ReportRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{:.2}", 100.0 * x)).unwrap_or_default()
}

impl ReportTable {
    pub fn num_value_columns(&self) -> usize {
        self.groups.iter().map(|g| g.columns.len()).sum()
    }

    /// Flat column names: `group / column`, or just `column` when ungrouped.
    pub fn flat_columns(&self) -> Vec<String> {
        let mut out = self.row_header.clone();
        for g in &self.groups {
            for c in &g.columns {
                out.push(if g.label.is_empty() { c.clone() } else { format!("{} / {c}", g.label) });
            }
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.flat_columns())?;
        for r in &self.rows {
            let mut rec = r.labels.clone();
            rec.extend(r.values.iter().map(|v| cell(*v)));
            w.write_record(rec)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::io("<table>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_text(&self) -> String {
        let label_cols = self.row_header.len();
        let mut header: Vec<String> = self.row_header.clone();
        header.extend(self.groups.iter().flat_map(|g| g.columns.iter().cloned()));
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.labels.iter().cloned().chain(r.values.iter().map(|v| cell(*v))).collect())
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        // widen the columns under a group so its label fits
        let mut start = label_cols;
        for g in &self.groups {
            let n = g.columns.len();
            if n == 0 {
                continue;
            }
            let span: usize = widths[start..start + n].iter().sum::<usize>() + 3 * (n - 1);
            if g.label.len() > span {
                widths[start + n - 1] += g.label.len() - span;
            }
            start += n;
        }

        let fmt_row = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i < label_cols { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            parts.join(" | ").trim_end().to_string()
        };

        let mut out = String::new();
        writeln!(out, "{}", self.title).expect("string write");
        if self.groups.iter().any(|g| !g.label.is_empty()) {
            let mut parts: Vec<String> = widths[..label_cols].iter().map(|w| " ".repeat(*w)).collect();
            let mut start = label_cols;
            for g in &self.groups {
                let n = g.columns.len();
                let span: usize = widths[start..start + n].iter().sum::<usize>() + 3 * n.saturating_sub(1);
                parts.push(format!("{:^span$}", g.label));
                start += n;
            }
            writeln!(out, "{}", parts.join(" | ").trim_end()).expect("string write");
        }
        writeln!(out, "{}", fmt_row(&header)).expect("string write");
        let total: usize = widths.iter().sum::<usize>() + 3 * widths.len().saturating_sub(1);
        writeln!(out, "{}", "-".repeat(total)).expect("string write");
        for row in &body {
            writeln!(out, "{}", fmt_row(row)).expect("string write");
        }
        out
    }
}
