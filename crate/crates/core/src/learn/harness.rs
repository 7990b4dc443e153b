//! Leave-k-participants-out evaluation and the experiments built on it.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::GROUP_ORDER;
use crate::error::{Error, Result};
use crate::labels::{label_dataset, LabelConfig, LabeledDataset, Target, Task};
use crate::learn::bayes::GaussianNb;
use crate::learn::forest::{train_forest, ForestParams};
use crate::learn::groups::{column_modality, FeatureGroup};
use crate::learn::matrix::{GroupedData, Matrix, Preprocessor};
use crate::learn::metrics::{accuracy_percent, balanced_accuracy_percent, predictions, roc_auc_macro};
use crate::learn::smote::{smote_balance, DEFAULT_K};
use crate::learn::derive_seed;
use crate::matching::EventDataset;
use crate::model::Modality;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Forest(ForestParams),
    NaiveBayes,
    /// Equal scores for every class: the chance baseline.
    Uniform,
    /// Independent uniform random scores per row.
    CoinFlip,
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Forest(_) => "forest",
            ModelSpec::NaiveBayes => "naive_bayes",
            ModelSpec::Uniform => "uniform",
            ModelSpec::CoinFlip => "coin_flip",
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "forest" | "rf" => Ok(ModelSpec::Forest(ForestParams::default())),
            "naive_bayes" | "nb" => Ok(ModelSpec::NaiveBayes),
            "uniform" | "baseline" => Ok(ModelSpec::Uniform),
            "coin_flip" | "coin" => Ok(ModelSpec::CoinFlip),
            _ => Err(format!("unknown model `{s}` (forest, naive_bayes, uniform, coin_flip)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub model: ModelSpec,
    pub group: FeatureGroup,
    /// Participants held out per iteration.
    pub k: usize,
    pub iterations: usize,
    pub seed: u64,
    pub smote: bool,
    pub smote_k: usize,
    /// Resampling attempts per iteration before giving up on a usable split.
    pub max_retries: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::Forest(ForestParams::default()),
            group: FeatureGroup::All,
            k: 20,
            iterations: 10,
            seed: 0,
            smote: true,
            smote_k: DEFAULT_K,
            max_retries: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldLog {
    pub test_participants: Vec<String>,
    pub train_participants: Vec<String>,
    pub n_train: usize,
    pub n_train_balanced: usize,
    pub n_test: usize,
    pub test_class_counts: Vec<usize>,
    pub attempts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationResult {
    pub iteration: usize,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub auc: f64,
    pub fold: FoldLog,
    /// Forest importances over the evaluated columns.
    #[serde(skip)]
    pub importances: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub target: Target,
    pub config: EvalConfig,
    pub n_events: usize,
    pub n_participants: usize,
    pub n_features: usize,
    pub class_counts: Vec<usize>,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub mean_balanced_acc: f64,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub iterations: Vec<IterationResult>,
}

impl EvaluationResult {
    /// Table cell `mean (std), AUC` with AUC scaled to 0..100.
    pub fn cell(&self) -> String {
        format!("{:.1} ({:.1}), {:.1}", self.mean_acc, self.std_acc, 100.0 * self.mean_auc)
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

struct Split {
    train: Vec<usize>,
    test: Vec<usize>,
    test_groups: Vec<usize>,
    attempts: usize,
}

fn draw_split(data: &GroupedData, cfg: &EvalConfig, rng: &mut ChaCha8Rng) -> Result<Split> {
    let p = data.participants.len();
    for attempt in 1..=cfg.max_retries {
        let mut test_groups = sample(rng, p, cfg.k).into_vec();
        test_groups.sort_unstable();
        let mut in_test = vec![false; p];
        test_groups.iter().for_each(|&g| in_test[g] = true);
        let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| in_test[data.groups[i]]);
        let test_counts = data.class_counts(&test);
        let train_counts = data.class_counts(&train);
        let test_ok = test_counts.iter().filter(|&&c| c > 0).count() >= 2;
        let train_ok = train_counts.iter().filter(|&&c| c > 0).count() >= 2
            && train_counts.iter().all(|&c| c == 0 || c >= 2);
        if test_ok && train_ok {
            return Ok(Split {
                train,
                test,
                test_groups,
                attempts: attempt,
            });
        }
    }
    Err(Error::Insufficient(format!(
        "no split with two test classes and trainable classes after {} draws",
        cfg.max_retries
    )))
}

fn fit_and_score(
    model: &ModelSpec,
    x: &Matrix,
    y: &[u8],
    n_classes: usize,
    test: &Matrix,
    rng: &mut ChaCha8Rng,
) -> Result<(Matrix, Option<Vec<f64>>)> {
    Ok(match model {
        ModelSpec::Forest(p) => {
            let f = train_forest(x, y, n_classes, p, rng.random())?;
            (f.predict_proba(test), Some(f.importances))
        }
        ModelSpec::NaiveBayes => (GaussianNb::fit(x, y, n_classes)?.predict_proba(test), None),
        ModelSpec::Uniform => {
            let mut m = Matrix::with_cols(n_classes);
            let row = vec![1.0 / n_classes as f64; n_classes];
            (0..test.n_rows()).for_each(|_| m.push_row(&row));
            (m, None)
        }
        ModelSpec::CoinFlip => {
            let mut m = Matrix::with_cols(n_classes);
            let mut row = vec![0.0; n_classes];
            for _ in 0..test.n_rows() {
                row.iter_mut().for_each(|v| *v = rng.random());
                m.push_row(&row);
            }
            (m, None)
        }
    })
}

fn run_iteration(data: &GroupedData, cfg: &EvalConfig, iteration: usize) -> Result<IterationResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, iteration as u64));
    let split = draw_split(data, cfg, &mut rng)?;
    let x_train = data.x.select_rows(&split.train);
    let y_train: Vec<u8> = split.train.iter().map(|&i| data.y[i]).collect();
    let x_test = data.x.select_rows(&split.test);
    let y_test: Vec<u8> = split.test.iter().map(|&i| data.y[i]).collect();

    let prep = Preprocessor::fit(&x_train);
    let x_train = prep.transform(&x_train);
    let x_test = prep.transform(&x_test);
    let (x_fit, y_fit) = if cfg.smote {
        let b = smote_balance(&x_train, &y_train, data.n_classes, cfg.smote_k, &mut rng)?;
        (b.x, b.y)
    } else {
        (x_train, y_train.clone())
    };

    let (scores, importances) = fit_and_score(&cfg.model, &x_fit, &y_fit, data.n_classes, &x_test, &mut rng)?;
    let predicted = predictions(&scores);
    let mut in_test = vec![false; data.participants.len()];
    split.test_groups.iter().for_each(|&g| in_test[g] = true);
    Ok(IterationResult {
        iteration,
        accuracy: accuracy_percent(&y_test, &predicted),
        balanced_accuracy: balanced_accuracy_percent(&y_test, &predicted, data.n_classes),
        auc: roc_auc_macro(&y_test, &scores)?,
        fold: FoldLog {
            test_participants: split.test_groups.iter().map(|&g| data.participants[g].clone()).collect(),
            train_participants: (0..data.participants.len())
                .filter(|&g| !in_test[g])
                .map(|g| data.participants[g].clone())
                .collect(),
            n_train: split.train.len(),
            n_train_balanced: y_fit.len(),
            n_test: split.test.len(),
            test_class_counts: data.class_counts(&split.test),
            attempts: split.attempts,
        },
        importances,
    })
}

/// Evaluate on an already-assembled grouped matrix.
pub fn evaluate_grouped(data: &GroupedData, target: Target, cfg: &EvalConfig) -> Result<EvaluationResult> {
    if cfg.iterations == 0 || cfg.k == 0 {
        return Err(Error::InvalidParameter("k and iterations must be positive".into()));
    }
    if data.participants.len() < cfg.k + 1 {
        return Err(Error::Insufficient(format!(
            "leave-{}-participants-out needs at least {} participants, found {}",
            cfg.k,
            cfg.k + 1,
            data.participants.len()
        )));
    }
    if data.x.n_cols() == 0 {
        return Err(Error::Input(format!("feature group {} selects no columns", cfg.group)));
    }
    let iterations: Vec<IterationResult> = (0..cfg.iterations)
        .into_par_iter()
        .map(|i| run_iteration(data, cfg, i))
        .collect::<Result<_>>()?;
    let acc: Vec<f64> = iterations.iter().map(|r| r.accuracy).collect();
    let bacc: Vec<f64> = iterations.iter().map(|r| r.balanced_accuracy).collect();
    let auc: Vec<f64> = iterations.iter().map(|r| r.auc).collect();
    let (mean_acc, std_acc) = mean_std(&acc);
    let (mean_auc, std_auc) = mean_std(&auc);
    let all: Vec<usize> = (0..data.len()).collect();
    Ok(EvaluationResult {
        target,
        config: *cfg,
        n_events: data.len(),
        n_participants: data.participants.len(),
        n_features: data.x.n_cols(),
        class_counts: data.class_counts(&all),
        mean_acc,
        std_acc,
        mean_balanced_acc: mean_std(&bacc).0,
        mean_auc,
        std_auc,
        iterations,
    })
}

/// Leave-k-participants-out evaluation: each iteration holds out `k`
/// randomly drawn participants, fits on the rest after train-only
/// imputation, scaling and balancing, and scores the held-out events.
pub fn evaluate_lkpo(ds: &LabeledDataset, cfg: &EvalConfig) -> Result<EvaluationResult> {
    let cols = cfg.group.select(&ds.events.columns);
    let data = GroupedData::from_labeled(ds, &cols);
    evaluate_grouped(&data, ds.target, cfg)
}

// ---------------------------------------------------------------------------
// Importances
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub rank: usize,
    pub feature: String,
    pub group: Option<Modality>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupImportance {
    pub group: Modality,
    pub n_features: usize,
    pub total: f64,
    pub mean_per_feature: f64,
    pub max: f64,
    /// 1-based rank of the group's best feature.
    pub best_rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub target: Target,
    pub features: Vec<ImportanceEntry>,
    pub groups: Vec<GroupImportance>,
    pub evaluation: EvaluationResult,
}

impl ImportanceReport {
    /// Sensor group whose features carry the most importance on average.
    pub fn top_group(&self) -> Option<Modality> {
        self.groups
            .iter()
            .max_by(|a, b| a.mean_per_feature.total_cmp(&b.mean_per_feature))
            .map(|g| g.group)
    }
}

/// Forest importances averaged over the evaluation iterations, ranked,
/// plus a per-sensor summary. `top_n` truncates the feature list only.
pub fn importance_report(ds: &LabeledDataset, cfg: &EvalConfig, top_n: usize) -> Result<ImportanceReport> {
    if !matches!(cfg.model, ModelSpec::Forest(_)) {
        return Err(Error::InvalidParameter("importances need the forest model".into()));
    }
    let evaluation = evaluate_lkpo(ds, cfg)?;
    let cols = cfg.group.select(&ds.events.columns);
    let per_iter: Vec<&Vec<f64>> = evaluation
        .iterations
        .iter()
        .filter_map(|r| r.importances.as_ref())
        .collect();
    let mut entries: Vec<ImportanceEntry> = cols
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let v: Vec<f64> = per_iter.iter().map(|imp| imp[j]).collect();
            let (mean, std) = mean_std(&v);
            let name = &ds.events.columns[c];
            ImportanceEntry {
                rank: 0,
                feature: name.clone(),
                group: column_modality(name),
                mean,
                std,
            }
        })
        .collect();
    // stable sort keeps column order among ties
    entries.sort_by(|a, b| b.mean.total_cmp(&a.mean));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    let groups = GROUP_ORDER
        .iter()
        .filter_map(|&g| {
            let members: Vec<&ImportanceEntry> = entries.iter().filter(|e| e.group == Some(g)).collect();
            let first = members.first()?;
            let total: f64 = members.iter().map(|e| e.mean).sum();
            Some(GroupImportance {
                group: g,
                n_features: members.len(),
                total,
                mean_per_feature: total / members.len() as f64,
                max: first.mean,
                best_rank: first.rank,
            })
        })
        .collect();
    entries.truncate(top_n);
    Ok(ImportanceReport {
        target: ds.target,
        features: entries,
        groups,
        evaluation,
    })
}

// ---------------------------------------------------------------------------
// Threshold sweep and sex composition
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: u8,
    pub histogram: Vec<usize>,
    pub result: Option<EvaluationResult>,
    /// Why the point has no result, when it has none.
    pub undefined: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub task: Task,
    pub points: Vec<SweepPoint>,
}

/// Relabel a three-class task at each grouping threshold and evaluate.
pub fn threshold_sweep(
    events: &EventDataset,
    task: Task,
    thresholds: &[u8],
    cfg: &EvalConfig,
    labels: &LabelConfig,
) -> Result<SweepResult> {
    if !task.is_three_class() {
        return Err(Error::InvalidParameter(format!("{task} is not a three-class task")));
    }
    let mut points = Vec::new();
    for &g in thresholds {
        let ds = label_dataset(events, Target::Task { task, threshold: g }, labels)?;
        let mut histogram = vec![0; 3];
        ds.labels.iter().for_each(|&l| histogram[usize::from(l)] += 1);
        let (result, undefined) = if let Some(c) = histogram.iter().position(|&n| n == 0) {
            (None, Some(format!("class {c} is empty")))
        } else {
            match evaluate_lkpo(&ds, cfg) {
                Ok(r) => (Some(r), None),
                Err(e @ Error::Insufficient(_)) => (None, Some(e.to_string())),
                Err(e) => return Err(e),
            }
        };
        points.push(SweepPoint {
            threshold: g,
            histogram,
            result,
            undefined,
        });
    }
    Ok(SweepResult { task, points })
}

/// Three-class same/opposite/mixed-sex inference on events with friends.
pub fn sex_composition_eval(events: &EventDataset, cfg: &EvalConfig, labels: &LabelConfig) -> Result<EvaluationResult> {
    let ds = label_dataset(events, Target::SexComposition, labels)?;
    evaluate_lkpo(&ds, cfg)
}
