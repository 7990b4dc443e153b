//! Dense row-major feature matrices. Missing values are NaN until imputed.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::labels::LabeledDataset;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn with_cols(n_cols: usize) -> Self {
        Self {
            n_rows: 0,
            n_cols,
            data: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::with_cols(n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::InvalidParameter("ragged rows".into()));
            }
            m.push_row(r);
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.n_cols, "row width");
        self.data.extend_from_slice(row);
        self.n_rows += 1;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut m = Self::with_cols(self.n_cols);
        m.data.reserve(idx.len() * self.n_cols);
        for &i in idx {
            m.push_row(self.row(i));
        }
        m
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |i| self.get(i, j))
    }
}

/// Train-fitted mean imputation followed by z-scoring. Columns without
/// any observed training value impute to 0; zero-variance columns keep
/// unit scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessor {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Preprocessor {
    pub fn fit(train: &Matrix) -> Self {
        let n_cols = train.n_cols();
        let mut means = Vec::with_capacity(n_cols);
        let mut scales = Vec::with_capacity(n_cols);
        for j in 0..n_cols {
            let (mut sum, mut n) = (0.0, 0usize);
            for v in train.column(j).filter(|v| !v.is_nan()) {
                sum += v;
                n += 1;
            }
            let mean = if n == 0 { 0.0 } else { sum / n as f64 };
            // after imputation missing cells sit at the mean and add no spread
            let ss: f64 = train
                .column(j)
                .filter(|v| !v.is_nan())
                .map(|v| (v - mean) * (v - mean))
                .sum();
            let std = if train.n_rows() == 0 {
                0.0
            } else {
                (ss / train.n_rows() as f64).sqrt()
            };
            means.push(mean);
            scales.push(if std > 0.0 { std } else { 1.0 });
        }
        Self { means, scales }
    }

    pub fn transform(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..out.n_rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                let x = if v.is_nan() { self.means[j] } else { *v };
                *v = (x - self.means[j]) / self.scales[j];
            }
        }
        out
    }
}

/// A labeled matrix whose rows belong to participants.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedData {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub n_classes: usize,
    /// Participant index of every row, into `participants`.
    pub groups: Vec<usize>,
    pub participants: Vec<String>,
    pub columns: Vec<String>,
}

impl GroupedData {
    /// Restrict a labeled dataset to `columns` (indices into its column list).
    pub fn from_labeled(ds: &LabeledDataset, columns: &[usize]) -> Self {
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &ds.events.rows {
            index.entry(r.participant_id.as_str()).or_default();
        }
        let participants: Vec<String> = index.keys().map(|s| s.to_string()).collect();
        for (i, v) in index.values_mut().enumerate() {
            *v = i;
        }
        let mut x = Matrix::with_cols(columns.len());
        let mut groups = Vec::with_capacity(ds.events.rows.len());
        let mut row = vec![0.0; columns.len()];
        for r in &ds.events.rows {
            for (dst, &c) in row.iter_mut().zip(columns) {
                *dst = r.features[c].unwrap_or(f64::NAN);
            }
            x.push_row(&row);
            groups.push(index[r.participant_id.as_str()]);
        }
        Self {
            x,
            y: ds.labels.clone(),
            n_classes: ds.n_classes(),
            groups,
            participants,
            columns: columns.iter().map(|&c| ds.events.columns[c].clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn class_counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in rows {
            c[usize::from(self.y[i])] += 1;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preprocessor_imputes_with_train_mean() {
        let train = Matrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0], vec![f64::NAN, 5.0]]).unwrap();
        let p = Preprocessor::fit(&train);
        assert_eq!(p.means, vec![2.0, 5.0]);
        assert_eq!(p.scales[1], 1.0);
        let test = Matrix::from_rows(&[vec![f64::NAN, 7.0]]).unwrap();
        let t = p.transform(&test);
        assert_eq!(t.get(0, 0), 0.0);
        assert_eq!(t.get(0, 1), 2.0);
    }

    #[test]
    fn all_missing_column_imputes_zero() {
        let train = Matrix::from_rows(&[vec![f64::NAN], vec![f64::NAN]]).unwrap();
        let p = Preprocessor::fit(&train);
        assert_eq!(p.transform(&train).row(1), &[0.0]);
    }
}
