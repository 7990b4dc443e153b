//! Classifiers, balancing and the leave-k-participants-out harness.

pub mod bayes;
pub mod forest;
pub mod groups;
pub mod harness;
pub mod matrix;
pub mod metrics;
pub mod smote;

pub use bayes::GaussianNb;
pub use forest::{train_forest, ForestParams, TrainedForest};
pub use groups::FeatureGroup;
pub use harness::{
    evaluate_lkpo, importance_report, sex_composition_eval, threshold_sweep, EvalConfig,
    EvaluationResult, FoldLog, ImportanceReport, IterationResult, ModelSpec, SweepPoint,
    SweepResult,
};
pub use matrix::{GroupedData, Matrix, Preprocessor};
pub use metrics::{accuracy_percent, balanced_accuracy_percent, binary_auc, roc_auc_macro};
pub use smote::{smote_balance, SmoteOutput, SyntheticSample};

/// Independent 64-bit seed for stream `index` under `master`, via the
/// SplitMix64 finalizer. Used for per-tree, per-iteration and
/// per-participant generators so results do not depend on scheduling.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
