//! Exclusive classification of one window: row-wise softmax, then a
//! Hungarian match of rows to in-window ranks so no two rows share a rank.

use super::hungarian::hungarian;
use crate::error::{Error, Result};

/// Cost given to every rank column of a dummy row. Uniform, so it never
/// changes which ranks the real rows receive.
const DUMMY_ROW_COST: f64 = 1e6;

/// `rows × cols` row-major score matrix; column 0 is the non-salient class,
/// columns `1..=rows` are in-window ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WindowScoreMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {rows}x{cols} scores",
                data.len()
            )));
        }
        if cols != rows + 1 {
            return Err(Error::ShapeMismatch(format!(
                "window of {rows} rows needs {} classes, got {cols}",
                rows + 1
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite score".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(window: usize) -> Self {
        Self {
            rows: window,
            cols: window + 1,
            data: vec![0.0; window * (window + 1)],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

/// Labels for the rows of one window: 0 = non-salient, otherwise an
/// in-window rank; non-zero labels are distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowAssignment {
    pub labels: Vec<usize>,
}

impl WindowAssignment {
    pub fn is_exclusive(&self) -> bool {
        let mut seen = vec![false; self.labels.len() + 1];
        self.labels.iter().filter(|&&l| l > 0).all(|&l| {
            let fresh = !seen[l];
            seen[l] = true;
            fresh
        })
    }
}

/// Numerically stable log-softmax of one row.
pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    log_softmax(row).into_iter().map(f64::exp).collect()
}

/// Classifies a window and also returns the row-wise class probabilities.
pub fn classify_window(
    scores: &WindowScoreMatrix,
    dummy_mask: &[bool],
) -> (WindowAssignment, Vec<Vec<f64>>) {
    let w = scores.rows();
    assert_eq!(dummy_mask.len(), w, "dummy mask length");
    let log_p: Vec<Vec<f64>> = (0..w).map(|r| log_softmax(scores.row(r))).collect();
    let cost: Vec<Vec<f64>> = (0..w)
        .map(|r| {
            if dummy_mask[r] {
                vec![DUMMY_ROW_COST; w]
            } else {
                (1..=w).map(|c| -log_p[r][c]).collect()
            }
        })
        .collect();
    let perm = hungarian(&cost);
    let labels = (0..w)
        .map(|r| {
            let rank = perm[r] + 1;
            if dummy_mask[r] || log_p[r][0] > log_p[r][rank] {
                0
            } else {
                rank
            }
        })
        .collect();
    let probs = log_p
        .into_iter()
        .map(|row| row.into_iter().map(f64::exp).collect())
        .collect();
    (WindowAssignment { labels }, probs)
}

pub fn exclusive_classify(scores: &WindowScoreMatrix, dummy_mask: &[bool]) -> WindowAssignment {
    classify_window(scores, dummy_mask).0
}
