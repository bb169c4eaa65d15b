//! Stratified cross-validation with SMOTE, metrics, the baseline
//! classifiers and the branch ablation.

pub mod baselines;
pub mod crossval;
pub mod folds;
pub mod metrics;
pub mod smote;

pub use baselines::BaselineSpec;
pub use crossval::{
    ablate, ablation_table_tsv, baseline_table_tsv, cross_validate, flatten, prepare_fold, run_baseline, AblationRow,
    EvalData, FoldData,
};
pub use folds::{stratified_holdout, stratified_kfold, FoldPlan};
pub use metrics::{auc, compute_metrics, roc_curve, FoldMetrics, MeanStd, MetricsReport};
pub use smote::{smote, smote_balance, Synthetic};
