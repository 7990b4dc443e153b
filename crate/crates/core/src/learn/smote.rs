//! SMOTE class balancing with a doubling cap.
//!
//! Each class may grow to at most twice its size and never past the
//! largest class. The smallest such target becomes the common size: smaller
//! classes are topped up with synthetic points, larger ones are subsampled
//! without replacement.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::learn::matrix::Matrix;

pub const DEFAULT_K: usize = 5;

/// Where a synthetic row came from: `row = x[parent] + gap * (x[neighbor] - x[parent])`,
/// with indices into the input matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSample {
    pub row: usize,
    pub parent: usize,
    pub neighbor: usize,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoteOutput {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub synthetic: Vec<SyntheticSample>,
}

/// Per-class output sizes for the given class counts; absent classes stay 0.
pub fn balanced_counts(counts: &[usize]) -> Vec<usize> {
    let n_max = counts.iter().copied().max().unwrap_or(0);
    let common = counts
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| (2 * n).min(n_max))
        .min()
        .unwrap_or(0);
    counts.iter().map(|&n| if n == 0 { 0 } else { common }).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest rows of `members` to `members[at]` (excluding itself),
/// ties broken by row index.
pub fn nearest_neighbors(x: &Matrix, members: &[usize], at: usize, k: usize) -> Vec<usize> {
    let p = members[at];
    let mut d: Vec<(f64, usize)> = members
        .iter()
        .filter(|&&m| m != p)
        .map(|&m| (sq_dist(x.row(p), x.row(m)), m))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, m)| m).collect()
}

pub fn smote_balance<R: Rng>(
    x: &Matrix,
    y: &[u8],
    n_classes: usize,
    k: usize,
    rng: &mut R,
) -> Result<SmoteOutput> {
    if k == 0 {
        return Err(Error::InvalidParameter("SMOTE needs k >= 1".into()));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in y.iter().enumerate() {
        members[usize::from(c)].push(i);
    }
    if let Some(c) = members.iter().position(|m| m.len() == 1) {
        return Err(Error::Insufficient(format!(
            "class {c} has a single member; SMOTE needs a neighbor"
        )));
    }
    let counts: Vec<usize> = members.iter().map(Vec::len).collect();
    let target = balanced_counts(&counts);

    let mut out = SmoteOutput {
        x: Matrix::with_cols(x.n_cols()),
        y: Vec::new(),
        synthetic: Vec::new(),
    };
    let mut point = vec![0.0; x.n_cols()];
    for (class, rows) in members.iter().enumerate() {
        let n = rows.len();
        let want = target[class];
        if want < n {
            let mut keep = sample(rng, n, want).into_vec();
            keep.sort_unstable();
            for i in keep {
                out.x.push_row(x.row(rows[i]));
                out.y.push(class as u8);
            }
            continue;
        }
        for &r in rows {
            out.x.push_row(x.row(r));
            out.y.push(class as u8);
        }
        let need = want - n;
        if need == 0 {
            continue;
        }
        let kk = k.min(n - 1);
        let mut parents = sample(rng, n, need).into_vec();
        parents.sort_unstable();
        for at in parents {
            let nn = nearest_neighbors(x, rows, at, kk);
            let neighbor = nn[rng.random_range(0..nn.len())];
            let gap: f64 = rng.random();
            let parent = rows[at];
            for ((dst, &a), &b) in point.iter_mut().zip(x.row(parent)).zip(x.row(neighbor)) {
                *dst = a + gap * (b - a);
            }
            out.synthetic.push(SyntheticSample {
                row: out.y.len(),
                parent,
                neighbor,
                gap,
            });
            out.x.push_row(&point);
            out.y.push(class as u8);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn doubling_rule() {
        assert_eq!(balanced_counts(&[47, 894]), vec![94, 94]);
        assert_eq!(balanced_counts(&[100, 150]), vec![150, 150]);
        assert_eq!(balanced_counts(&[10, 0, 30]), vec![20, 0, 20]);
        assert_eq!(balanced_counts(&[5, 5]), vec![5, 5]);
    }

    #[test]
    fn singleton_class_is_rejected() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(smote_balance(&x, &[0, 1, 1], 2, 5, &mut rng).is_err());
    }

    #[test]
    fn two_member_class_uses_its_only_neighbor() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![5.0], vec![6.0], vec![7.0], vec![8.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = smote_balance(&x, &[0, 0, 1, 1, 1, 1], 2, 5, &mut rng).unwrap();
        assert_eq!(out.y.iter().filter(|&&c| c == 0).count(), 4);
        assert_eq!(out.y.iter().filter(|&&c| c == 1).count(), 4);
        for s in &out.synthetic {
            let v = out.x.get(s.row, 0);
            assert!((0.0..=1.0).contains(&v));
            assert_ne!(s.parent, s.neighbor);
        }
    }
}
