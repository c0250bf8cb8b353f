//! Ranking and classification metrics for scored assays, the paired
//! bootstrap, and report files.

mod bootstrap;
mod metrics;
mod report;

pub use bootstrap::{bootstrap_diff_stderr, population_std};
pub use metrics::{auc, descending_order, mcc, median, mid_ranks, ndcg, spearman, top_fraction_recall, Threshold};
pub use report::{
    aggregate, build_report, evaluate_assay, MetricReport, MetricRow, RowKind, ScoredAssay, Significance,
    RECALL_FRACTION,
};
