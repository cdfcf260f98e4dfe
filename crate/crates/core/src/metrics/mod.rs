//! ROC/AUC, generalization gap, dispersion, learning curves and adversarial
//! sampling.

mod dispersion;
mod generalization;
mod roc;
mod sampling;
mod stats;

pub use dispersion::{
    dispersion_exact, dispersion_greedy, dispersion_profile, write_dispersion_csv,
    DispersionMethod, DispersionResult, EXACT_SUBSET_LIMIT,
};
pub use generalization::{
    generalization_gap, learning_curve, select_probes, write_curve_csv, CurvePoint, GapReport,
    LearningCurveConfig,
};
pub use roc::{roc_and_auc, RocReport};
pub use sampling::{adversarial_sampling, AdversarialSample, AdversarialSamplingConfig, BatchPick};
pub use stats::{average_ranks, mean_std, spearman, windowed_mean_decreasing, windowed_means};

/// AUC above which an attacker counts as effective.
pub const EFFECTIVENESS_THRESHOLD: f64 = 0.75;
