//! Correlation and effect-size screening of event features against
//! social-context labels.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabeledDataset;

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub const CF_TOLERANCE: f64 = 1e-10;
const CF_MAX_ITER: usize = 10_000;

/// Continued fraction of the incomplete beta function, modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_TOLERANCE {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * reg_inc_beta(df / 2.0, 0.5, df / (df + t * t));
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value of a t statistic.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    reg_inc_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Insufficient(format!("correlation needs n >= 3, got {n}")));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("first vector is constant"));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("second vector is constant"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        two_sided_p(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(CorrelationResult { r, p, n })
}

/// Pearson correlation of a 0/1 grouping with a continuous variable.
pub fn point_biserial(b: &[bool], y: &[f64]) -> Result<CorrelationResult> {
    let ones = b.iter().filter(|&&v| v).count();
    if ones == 0 || ones == b.len() {
        return Err(Error::UndefinedCorrelation("binary vector has a single class"));
    }
    let coded: Vec<f64> = b.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    pearson(&coded, y)
}

// ---------------------------------------------------------------------------
// Two-sample tests
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let m = mean(x);
    let ss = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    (m, ss / (x.len() - 1) as f64)
}

fn check_sizes(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Insufficient(format!(
            "two-sample statistics need at least 2 values per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn pooled_var(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    (ma, mb, ((n1 - 1.0) * va + (n2 - 1.0) * vb) / (n1 + n2 - 2.0))
}

/// Pooled-variance Student t of `mean(a) - mean(b)`; two-sided p.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    check_sizes(a, b)?;
    let (ma, mb, sp2) = pooled_var(a, b);
    if sp2 == 0.0 {
        return Err(Error::Degenerate("zero pooled variance"));
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let t = (ma - mb) / (sp2 * (1.0 / n1 + 1.0 / n2)).sqrt();
    let df = n1 + n2 - 2.0;
    Ok(TTest {
        t,
        p: two_sided_p(t, df),
        df,
    })
}

/// Welch's unequal-variance t with Welch-Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    check_sizes(a, b)?;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (va / n1, vb / n2);
    if qa + qb == 0.0 {
        return Err(Error::Degenerate("zero variance in both groups"));
    }
    let t = (ma - mb) / (qa + qb).sqrt();
    let df = (qa + qb).powi(2) / (qa * qa / (n1 - 1.0) + qb * qb / (n2 - 1.0));
    Ok(TTest {
        t,
        p: two_sided_p(t, df),
        df,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeResult {
    pub t: f64,
    pub p: f64,
    pub d: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n1: usize,
    pub n2: usize,
}

impl EffectSizeResult {
    /// True when the 95% interval excludes zero.
    pub fn significant(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

/// Cohen's d of `a` against `b` with a normal-approximation 95% interval,
/// together with the pooled t test on the same samples.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<EffectSizeResult> {
    let tt = t_test(a, b)?;
    let (ma, mb, sp2) = pooled_var(a, b);
    let d = (ma - mb) / sp2.sqrt();
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let se = ((n1 + n2) / (n1 * n2) + d * d / (2.0 * (n1 + n2))).sqrt();
    Ok(EffectSizeResult {
        t: tt.t,
        p: tt.p,
        d,
        ci_low: d - 1.96 * se,
        ci_high: d + 1.96 * se,
        n1: a.len(),
        n2: b.len(),
    })
}

/// `****` for p ≤ 1e-4, `***` for p ≤ 1e-3, `**` for p ≤ 1e-2.
pub fn p_stars(p: f64) -> &'static str {
    if p <= 1e-4 {
        "****"
    } else if p <= 1e-3 {
        "***"
    } else if p <= 1e-2 {
        "**"
    } else {
        ""
    }
}

// ---------------------------------------------------------------------------
// Feature ranking
// ---------------------------------------------------------------------------

/// Two label classes compared by a ranking; statistics are oriented as
/// `second` minus `first`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contrast {
    pub first: u8,
    pub second: u8,
}

fn class_alias(s: &str) -> Option<u8> {
    match s {
        "alone" | "without" | "0" => Some(0),
        "sgroup" | "with" | "1" => Some(1),
        "lgroup" | "2" => Some(2),
        _ => None,
    }
}

fn class_name(c: u8) -> &'static str {
    match c {
        0 => "alone",
        1 => "sgroup",
        _ => "lgroup",
    }
}

impl FromStr for Contrast {
    type Err = String;

    /// `alone-vs-lgroup`, `without-vs-with`, `0-vs-2`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (a, b) = s
            .split_once("-vs-")
            .ok_or_else(|| format!("contrast `{s}` is not of the form A-vs-B"))?;
        let first = class_alias(a).ok_or_else(|| format!("unknown class `{a}`"))?;
        let second = class_alias(b).ok_or_else(|| format!("unknown class `{b}`"))?;
        if first == second {
            return Err(format!("contrast `{s}` compares a class with itself"));
        }
        Ok(Contrast { first, second })
    }
}

impl fmt::Display for Contrast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-vs-{}", class_name(self.first), class_name(self.second))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    T,
    D,
    R,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "t" => Ok(Metric::T),
            "d" => Ok(Metric::D),
            "r" => Ok(Metric::R),
            _ => Err(format!("unknown metric `{s}` (expected t, d or r)")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::T => "t",
            Metric::D => "d",
            Metric::R => "r",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub column: usize,
    pub feature: String,
    pub value: f64,
    pub p: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_first: usize,
    pub n_second: usize,
    pub marker: String,
}

impl RankedFeature {
    /// Cell such as `0.19 (+) ****`.
    pub fn cell(&self) -> String {
        let sign = if self.value >= 0.0 { '+' } else { '-' };
        let mut s = format!("{:.2} ({sign})", self.value.abs());
        if !self.marker.is_empty() {
            s.push(' ');
            s.push_str(&self.marker);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub contrast: Contrast,
    pub metric: Metric,
    /// Features whose statistic was undefined (constant or too few values).
    pub skipped: usize,
    pub rows: Vec<RankedFeature>,
}

fn score_column(ds: &LabeledDataset, column: usize, contrast: Contrast, metric: Metric) -> Option<RankedFeature> {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (row, &label) in ds.events.rows.iter().zip(&ds.labels) {
        let Some(v) = row.features[column] else { continue };
        if label == contrast.first {
            first.push(v);
        } else if label == contrast.second {
            second.push(v);
        }
    }
    let (value, p, ci) = match metric {
        Metric::T => {
            let r = t_test(&second, &first).ok()?;
            (r.t, r.p, None)
        }
        Metric::D => {
            let r = cohens_d(&second, &first).ok()?;
            (r.d, r.p, Some((r.ci_low, r.ci_high)))
        }
        Metric::R => {
            let mut b = vec![false; first.len()];
            b.resize(first.len() + second.len(), true);
            let y: Vec<f64> = first.iter().chain(&second).copied().collect();
            let r = point_biserial(&b, &y).ok()?;
            (r.r, r.p, None)
        }
    };
    if !value.is_finite() {
        return None;
    }
    let marker = match ci {
        Some((lo, hi)) if lo <= 0.0 && hi >= 0.0 => "*".to_string(),
        Some(_) => String::new(),
        None => p_stars(p).to_string(),
    };
    Some(RankedFeature {
        column,
        feature: ds.events.columns[column].clone(),
        value,
        p,
        ci_low: ci.map(|c| c.0),
        ci_high: ci.map(|c| c.1),
        n_first: first.len(),
        n_second: second.len(),
        marker,
    })
}

/// Features ranked by the absolute value of `metric` on the contrast,
/// ties broken by column order. `top = None` keeps every scored feature.
pub fn rank_features(
    ds: &LabeledDataset,
    contrast: Contrast,
    metric: Metric,
    top: Option<usize>,
) -> Result<RankTable> {
    for class in [contrast.first, contrast.second] {
        if !ds.labels.contains(&class) {
            return Err(Error::Insufficient(format!(
                "class {class} absent from the labeled dataset"
            )));
        }
    }
    let scored: Vec<Option<RankedFeature>> = (0..ds.events.columns.len())
        .into_par_iter()
        .map(|c| score_column(ds, c, contrast, metric))
        .collect();
    let skipped = scored.iter().filter(|s| s.is_none()).count();
    let mut rows: Vec<RankedFeature> = scored.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        b.value
            .abs()
            .total_cmp(&a.value.abs())
            .then(a.column.cmp(&b.column))
    });
    if let Some(k) = top {
        rows.truncate(k);
    }
    Ok(RankTable {
        contrast,
        metric,
        skipped,
        rows,
    })
}

pub fn write_rank_csv(table: &RankTable, path: &Path) -> Result<()> {
    let mut out = String::from("rank,feature,metric,value,p,ci_low,ci_high,n_first,n_second,marker,cell\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (i, r) in table.rows.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            i + 1,
            r.feature,
            table.metric,
            r.value,
            r.p,
            opt(r.ci_low),
            opt(r.ci_high),
            r.n_first,
            r.n_second,
            r.marker,
            r.cell()
        )
        .expect("write to String");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
