//! Downstream evaluation of embeddings on link prediction and node
//! classification.

mod experiment;
mod link;
mod logistic;
mod metrics;

pub use experiment::{
    classification_task, derived_rng, evaluate_classification, link_task, mean_accuracy,
    random_split, run_ablations, run_embedding_sweep, run_synthetic_experiment, stratified_split,
    write_accuracy_csv, write_report, AblationRow, AccuracyRow, ClassificationMetrics, EvalReport,
    EvalSettings, Method, SweepRow, SyntheticExperiment,
};
pub use link::{evaluate_links, link_scores, removal_count, split_links, LinkSplit};
pub use logistic::{LogisticConfig, LogisticRegression};
pub use metrics::{accuracy, auc_roc, average_precision, f1_scores, f1_single};
