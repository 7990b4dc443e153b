//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::argmax;
use crate::learn::matrix::Matrix;

/// Fraction of the largest feature variance added to every variance.
pub const VAR_SMOOTHING: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub vars: Vec<Vec<f64>>,
}

impl GaussianNb {
    pub fn fit(x: &Matrix, y: &[u8], n_classes: usize) -> Result<Self> {
        let n = x.n_rows();
        if n == 0 || y.len() != n {
            return Err(Error::Insufficient("empty or mismatched training set".into()));
        }
        let f = x.n_cols();
        let mut counts = vec![0usize; n_classes];
        let mut means = vec![vec![0.0; f]; n_classes];
        for (row, &c) in x.rows().zip(y) {
            let c = usize::from(c);
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(row) {
                *m += v;
            }
        }
        for (m, &k) in means.iter_mut().zip(&counts) {
            if k > 0 {
                m.iter_mut().for_each(|v| *v /= k as f64);
            }
        }
        let mut vars = vec![vec![0.0; f]; n_classes];
        for (row, &c) in x.rows().zip(y) {
            let c = usize::from(c);
            for ((s, v), m) in vars[c].iter_mut().zip(row).zip(&means[c]) {
                *s += (v - m) * (v - m);
            }
        }
        for (s, &k) in vars.iter_mut().zip(&counts) {
            if k > 0 {
                s.iter_mut().for_each(|v| *v /= k as f64);
            }
        }
        let max_var = (0..f)
            .map(|j| {
                let mean = x.column(j).sum::<f64>() / n as f64;
                x.column(j).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
            })
            .fold(0.0, f64::max);
        let eps = if max_var > 0.0 { VAR_SMOOTHING * max_var } else { VAR_SMOOTHING };
        vars.iter_mut().flatten().for_each(|v| *v += eps);
        Ok(Self {
            priors: counts.iter().map(|&k| k as f64 / n as f64).collect(),
            means,
            vars,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.priors.len()
    }

    fn joint_log_likelihood(&self, row: &[f64]) -> Vec<f64> {
        (0..self.n_classes())
            .map(|c| {
                if self.priors[c] == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let mut ll = self.priors[c].ln();
                for ((v, m), s) in row.iter().zip(&self.means[c]).zip(&self.vars[c]) {
                    ll -= 0.5 * ((2.0 * std::f64::consts::PI * s).ln() + (v - m) * (v - m) / s);
                }
                ll
            })
            .collect()
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        let jll = self.joint_log_likelihood(row);
        let top = jll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = jll.iter().map(|v| (v - top).exp()).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        p
    }

    pub fn predict_proba(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::with_cols(self.n_classes());
        for row in x.rows() {
            out.push_row(&self.predict_proba_row(row));
        }
        out
    }

    pub fn predict(&self, x: &Matrix) -> Vec<u8> {
        x.rows().map(|r| argmax(&self.predict_proba_row(r)) as u8).collect()
    }
}
