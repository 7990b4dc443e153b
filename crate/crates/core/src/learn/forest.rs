//! Bagged Gini decision trees with mean-decrease-in-impurity importances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::matrix::Matrix;
use crate::learn::{argmax, derive_seed};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features inspected per split; `None` means `round(sqrt(F))`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub oob_score: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            mtry: None,
            min_leaf: 1,
            max_depth: None,
            bootstrap: true,
            oob_score: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        dist: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_dist(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { dist } => return dist,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedForest {
    pub n_classes: usize,
    pub n_features: usize,
    pub trees: Vec<Tree>,
    /// Normalized mean decrease in impurity; sums to 1 when any tree split.
    pub importances: Vec<f64>,
    pub oob_score: Option<f64>,
}

impl TrainedForest {
    pub fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.leaf_dist(row)) {
                *acc += v;
            }
        }
        let n = self.trees.len() as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }

    pub fn predict_proba(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::with_cols(self.n_classes);
        for row in x.rows() {
            out.push_row(&self.predict_proba_row(row));
        }
        out
    }

    pub fn predict(&self, x: &Matrix) -> Vec<u8> {
        x.rows().map(|r| argmax(&self.predict_proba_row(r)) as u8).collect()
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    n_classes: usize,
    mtry: usize,
    min_leaf: usize,
    max_depth: usize,
    importances: Vec<f64>,
    n_root: f64,
    buf: Vec<(f64, u8)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn gini_of(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn sum_sq_over(counts: &[usize], n: usize) -> f64 {
    counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n as f64
}

impl Builder<'_> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let mut dist = vec![0.0; self.n_classes];
        for &i in idx {
            dist[usize::from(self.y[i])] += 1.0;
        }
        let n = idx.len() as f64;
        dist.iter_mut().for_each(|v| *v /= n);
        Node::Leaf { dist }
    }

    /// Best split of `feature` over `idx`, scored by
    /// `sum_c l_c^2 / n_l + sum_c r_c^2 / n_r` (higher is purer).
    /// `None` when the feature is constant on the node.
    fn scan_feature(&mut self, idx: &[usize], feature: usize, total: &[usize]) -> Option<Option<BestSplit>> {
        self.buf.clear();
        self.buf
            .extend(idx.iter().map(|&i| (self.x.get(i, feature), self.y[i])));
        self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let n = self.buf.len();
        if self.buf[0].0 == self.buf[n - 1].0 {
            return None;
        }
        let mut left = vec![0usize; self.n_classes];
        let mut best: Option<BestSplit> = None;
        for p in 0..n - 1 {
            left[usize::from(self.buf[p].1)] += 1;
            let (a, b) = (self.buf[p].0, self.buf[p + 1].0);
            if a == b {
                continue;
            }
            let nl = p + 1;
            let nr = n - nl;
            if nl < self.min_leaf || nr < self.min_leaf {
                continue;
            }
            let mut score = sum_sq_over(&left, nl);
            let mut ssr = 0.0;
            for (t, l) in total.iter().zip(&left) {
                let r = t - l;
                ssr += (r * r) as f64;
            }
            score += ssr / nr as f64;
            if best.as_ref().is_none_or(|bs| score > bs.score) {
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(BestSplit {
                    feature,
                    threshold,
                    score,
                });
            }
        }
        Some(best)
    }

    fn build(&mut self, idx: &mut [usize], rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes: Vec<Node> = Vec::new();
        // (node slot, start, end, depth) over `idx`
        let mut stack = vec![(0usize, 0usize, idx.len(), 0usize)];
        nodes.push(Node::Leaf { dist: Vec::new() });
        let n_features = self.x.n_cols();
        let mut order: Vec<usize> = (0..n_features).collect();
        while let Some((slot, start, end, depth)) = stack.pop() {
            let part = &mut idx[start..end];
            let n = part.len();
            let mut total = vec![0usize; self.n_classes];
            for &i in part.iter() {
                total[usize::from(self.y[i])] += 1;
            }
            let gini = gini_of(&total, n);
            if gini <= 0.0 || n < 2 * self.min_leaf || depth >= self.max_depth {
                nodes[slot] = self.leaf(part);
                continue;
            }
            // Draw features without replacement until `mtry` non-constant
            // ones have been scanned or all features are exhausted.
            let mut best: Option<BestSplit> = None;
            let mut informative = 0;
            for j in 0..n_features {
                let r = rng.random_range(j..n_features);
                order.swap(j, r);
                let f = order[j];
                let Some(found) = self.scan_feature(part, f, &total) else {
                    continue;
                };
                informative += 1;
                if let Some(s) = found {
                    if best.as_ref().is_none_or(|b| s.score > b.score) {
                        best = Some(s);
                    }
                }
                if informative >= self.mtry {
                    break;
                }
            }
            let Some(best) = best else {
                nodes[slot] = self.leaf(part);
                continue;
            };
            let mut nl = 0;
            for i in 0..n {
                if self.x.get(part[i], best.feature) <= best.threshold {
                    part.swap(i, nl);
                    nl += 1;
                }
            }
            // weighted impurity decrease: n * gini - (n_l * gini_l + n_r * gini_r)
            let decrease = n as f64 * gini - (n as f64 - best.score);
            self.importances[best.feature] += decrease / self.n_root;
            let left = nodes.len();
            nodes.push(Node::Leaf { dist: Vec::new() });
            let right = nodes.len();
            nodes.push(Node::Leaf { dist: Vec::new() });
            nodes[slot] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left,
                right,
            };
            stack.push((right, start + nl, end, depth + 1));
            stack.push((left, start, start + nl, depth + 1));
        }
        Tree { nodes }
    }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

pub fn default_mtry(n_features: usize) -> usize {
    ((n_features as f64).sqrt().round() as usize).max(1)
}

/// Train a forest. Tree `i` draws from its own generator seeded with
/// `derive_seed(seed, i)`, so the result does not depend on thread count.
pub fn train_forest(x: &Matrix, y: &[u8], n_classes: usize, params: &ForestParams, seed: u64) -> Result<TrainedForest> {
    let n = x.n_rows();
    if n == 0 || y.len() != n {
        return Err(Error::Insufficient("empty or mismatched training set".into()));
    }
    if params.n_trees == 0 || params.min_leaf == 0 {
        return Err(Error::InvalidParameter("n_trees and min_leaf must be positive".into()));
    }
    if y.iter().any(|&c| usize::from(c) >= n_classes) {
        return Err(Error::InvalidParameter("label outside the class range".into()));
    }
    let mtry = params.mtry.unwrap_or_else(|| default_mtry(x.n_cols())).max(1);
    let grown: Vec<(Tree, Vec<f64>, Vec<usize>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
            let mut idx: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let oob: Vec<usize> = if params.oob_score && params.bootstrap {
                let mut inbag = vec![false; n];
                idx.iter().for_each(|&i| inbag[i] = true);
                (0..n).filter(|&i| !inbag[i]).collect()
            } else {
                Vec::new()
            };
            let mut b = Builder {
                x,
                y,
                n_classes,
                mtry,
                min_leaf: params.min_leaf,
                max_depth: params.max_depth.unwrap_or(usize::MAX),
                importances: vec![0.0; x.n_cols()],
                n_root: idx.len() as f64,
                buf: Vec::with_capacity(idx.len()),
            };
            let tree = b.build(&mut idx, &mut rng);
            let mut imp = b.importances;
            normalize(&mut imp);
            (tree, imp, oob)
        })
        .collect();

    let mut importances = vec![0.0; x.n_cols()];
    for (_, imp, _) in &grown {
        for (a, v) in importances.iter_mut().zip(imp) {
            *a += v;
        }
    }
    normalize(&mut importances);

    let oob_score = if params.oob_score && params.bootstrap {
        let mut votes = vec![vec![0.0; n_classes]; n];
        let mut seen = vec![false; n];
        for (tree, _, oob) in &grown {
            for &i in oob {
                seen[i] = true;
                for (acc, v) in votes[i].iter_mut().zip(tree.leaf_dist(x.row(i))) {
                    *acc += v;
                }
            }
        }
        let scored: Vec<usize> = (0..n).filter(|&i| seen[i]).collect();
        if scored.is_empty() {
            None
        } else {
            let correct = scored
                .iter()
                .filter(|&&i| argmax(&votes[i]) == usize::from(y[i]))
                .count();
            Some(correct as f64 / scored.len() as f64)
        }
    } else {
        None
    };

    Ok(TrainedForest {
        n_classes,
        n_features: x.n_cols(),
        trees: grown.into_iter().map(|(t, _, _)| t).collect(),
        importances,
        oob_score,
    })
}
