//! Reference implementations and fixtures shared by the integration tests.
//!
//! The oracles deliberately use different formulas from the library: pairwise
//! differences instead of centered sums, a Stirling series instead of the
//! Lanczos gamma, and Simpson quadrature instead of the incomplete beta.
#![allow(dead_code)]

use std::f64::consts::PI;

use drinkctx::labels::{Task, LabelConfig};
use drinkctx::learn::{GroupedData, Matrix};
use drinkctx::model::Modality;
use drinkctx::synth::{CohortSpec, Effect, EffectDriver};

/// `sum_{i<j} (x_i - x_j)(y_i - y_j)`, which equals `n * S_xy`.
fn pairwise_cross(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            s += (x[i] - x[j]) * (y[i] - y[j]);
        }
    }
    s
}

pub fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    pairwise_cross(x, y) / (pairwise_cross(x, x) * pairwise_cross(y, y)).sqrt()
}

/// Sample variance from pairwise squared differences.
pub fn brute_var(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    pairwise_cross(x, x) / (n * (n - 1.0))
}

pub fn brute_mean(x: &[f64]) -> f64 {
    x.iter().rev().sum::<f64>() / x.len() as f64
}

/// Class-means closed form `(M1 - M0) / s_n * sqrt(p q)` with the
/// population standard deviation `s_n`.
pub fn brute_point_biserial(b: &[bool], y: &[f64]) -> f64 {
    let ones: Vec<f64> = b.iter().zip(y).filter(|(g, _)| **g).map(|(_, v)| *v).collect();
    let zeros: Vec<f64> = b.iter().zip(y).filter(|(g, _)| !**g).map(|(_, v)| *v).collect();
    let n = y.len() as f64;
    let p = ones.len() as f64 / n;
    let sn = (brute_var(y) * (n - 1.0) / n).sqrt();
    (brute_mean(&ones) - brute_mean(&zeros)) / sn * (p * (1.0 - p)).sqrt()
}

fn brute_pooled_var(a: &[f64], b: &[f64]) -> f64 {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    ((n1 - 1.0) * brute_var(a) + (n2 - 1.0) * brute_var(b)) / (n1 + n2 - 2.0)
}

pub fn brute_t(a: &[f64], b: &[f64]) -> f64 {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    (brute_mean(a) - brute_mean(b)) / (brute_pooled_var(a, b) * (1.0 / n1 + 1.0 / n2)).sqrt()
}

pub fn brute_d(a: &[f64], b: &[f64]) -> f64 {
    (brute_mean(a) - brute_mean(b)) / brute_pooled_var(a, b).sqrt()
}

/// `ln Γ(x)` by recurrence up to x >= 20, then the Stirling series.
pub fn stirling_ln_gamma(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 20.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let x2 = x * x;
    let series = 1.0 / (12.0 * x) - 1.0 / (360.0 * x * x2) + 1.0 / (1260.0 * x * x2 * x2)
        - 1.0 / (1680.0 * x * x2 * x2 * x2);
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series
}

pub fn t_density(t: f64, df: f64) -> f64 {
    let ln_c = stirling_ln_gamma((df + 1.0) / 2.0) - stirling_ln_gamma(df / 2.0) - 0.5 * (df * PI).ln();
    (ln_c - (df + 1.0) / 2.0 * (1.0 + t * t / df).ln()).exp()
}

/// Student t CDF as `1/2 + ∫_0^t f`, composite Simpson on 20 000 panels.
pub fn simpson_t_cdf(t: f64, df: f64) -> f64 {
    let n = 20_000;
    let h = t / n as f64;
    let mut s = t_density(0.0, df) + t_density(t, df);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * t_density(i as f64 * h, df);
    }
    0.5 + s * h / 3.0
}

/// Squared distances from `rows[at]` to every other member, brute force.
pub fn brute_knn_radius(x: &Matrix, members: &[usize], at: usize, k: usize) -> f64 {
    let p = x.row(at);
    let mut d: Vec<f64> = members
        .iter()
        .filter(|&&m| m != at)
        .map(|&m| x.row(m).iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    d.sort_by(f64::total_cmp);
    d[k.min(d.len()) - 1]
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A grouped matrix where every participant holds `per_class` events of
/// each class, so every leave-k-out test fold is exactly balanced.
pub fn balanced_grouped(n_participants: usize, per_class: usize, n_classes: usize, seed: u64) -> GroupedData {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x = Matrix::with_cols(4);
    let (mut y, mut groups) = (Vec::new(), Vec::new());
    for p in 0..n_participants {
        for c in 0..n_classes {
            for _ in 0..per_class {
                let row: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
                x.push_row(&row);
                y.push(c as u8);
                groups.push(p);
            }
        }
    }
    GroupedData {
        x,
        y,
        n_classes,
        groups,
        participants: (0..n_participants).map(|p| format!("p{p:03}")).collect(),
        columns: (0..4).map(|j| format!("f{j}")).collect(),
    }
}

/// 50 participants, friends_two balanced 550/550, ACC shifted by d = 1.0
/// when friends are present.
pub fn signal_spec(seed: u64) -> CohortSpec {
    let mut spec = CohortSpec {
        seed,
        n_participants: 50,
        effects: vec![Effect {
            driver: EffectDriver::Task { task: Task::FriendsTwo },
            modality: Modality::Acc,
            d: 1.0,
        }],
        ..CohortSpec::default()
    };
    spec.companions.friends_many_share = 0.3;
    spec.companions.friends_one_share = 0.2;
    spec
}

pub fn labels() -> LabelConfig {
    LabelConfig::default()
}
