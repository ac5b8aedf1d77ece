//! LIBSVM text format: `label idx:val idx:val …` with 1-based, strictly
//! increasing feature indices per line.

use std::fmt::Write as _;
use std::io::BufRead;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::CsrMatrix;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    pub rows: usize,
    pub cols: usize,
    /// `(row, col, value)`, 0-based, sorted by row then column.
    pub entries: Vec<(usize, usize, f64)>,
    /// In `{0, 1}`.
    pub labels: Vec<f64>,
    pub bias_absorbed: bool,
}

impl SparseDataset {
    pub fn to_csr(&self) -> Arc<CsrMatrix> {
        Arc::new(CsrMatrix::from_sorted_triplets(self.rows, self.cols, &self.entries))
    }
}

fn map_label(tok: &str) -> Option<f64> {
    match tok.parse::<f64>().ok()? {
        v if v == 1.0 => Some(1.0),
        v if v == -1.0 || v == 0.0 => Some(0.0),
        _ => None,
    }
}

/// Parses a dataset. Blank lines and `#` comments are skipped; labels
/// `{−1, 0}` map to 0 and `{+1, 1}` to 1. With `add_bias` a trailing column
/// of ones is appended.
pub fn parse_libsvm(reader: impl BufRead, add_bias: bool) -> Result<SparseDataset, ParseError> {
    let mut entries = Vec::new();
    let mut labels = Vec::new();
    let mut cols = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let bad = |reason: String| ParseError::Malformed { line: lineno, reason };
        let mut toks = content.split_whitespace();
        let label_tok = toks.next().expect("nonempty line has a token");
        let label = map_label(label_tok).ok_or_else(|| bad(format!("unsupported label {label_tok:?}")))?;
        let row = labels.len();
        labels.push(label);
        let mut last = 0usize;
        for tok in toks {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| bad(format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx.parse().map_err(|_| bad(format!("bad index {idx:?}")))?;
            let val: f64 = val.parse().map_err(|_| bad(format!("bad value {val:?}")))?;
            if idx == 0 {
                return Err(bad("indices are 1-based".into()));
            }
            if idx <= last {
                return Err(bad(format!("index {idx} does not increase (previous {last})")));
            }
            last = idx;
            cols = cols.max(idx);
            entries.push((row, idx - 1, val));
        }
    }
    let rows = labels.len();
    if add_bias {
        let bias_col = cols;
        cols += 1;
        let mut with_bias = Vec::with_capacity(entries.len() + rows);
        let mut it = entries.into_iter().peekable();
        for r in 0..rows {
            while let Some(e) = it.next_if(|e| e.0 == r) {
                with_bias.push(e);
            }
            with_bias.push((r, bias_col, 1.0));
        }
        entries = with_bias;
    }
    Ok(SparseDataset {
        rows,
        cols,
        entries,
        labels,
        bias_absorbed: add_bias,
    })
}

/// Writes the dataset back in LIBSVM form (labels as `0`/`1`, bias column
/// included as an ordinary feature).
pub fn serialize_libsvm(ds: &SparseDataset) -> String {
    let mut out = String::new();
    let mut it = ds.entries.iter().peekable();
    for (r, y) in ds.labels.iter().enumerate() {
        write!(out, "{}", *y as i64).unwrap();
        while let Some((_, c, v)) = it.next_if(|e| e.0 == r) {
            write!(out, " {}:{}", c + 1, v).unwrap();
        }
        out.push('\n');
    }
    out
}
