//! Utterance-level evaluation: Pearson (LCC) and Spearman (SRCC)
//! correlation between predicted and ground-truth metric values.

mod correlation;
mod report;

pub use correlation::{average_ranks, pearson_lcc, spearman_srcc};
pub use report::{evaluate, EvaluationReport, MetricScore};
