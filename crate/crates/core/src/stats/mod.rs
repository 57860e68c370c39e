//! Per-object appearance rates, one-way ANOVA and Tukey HSD.

mod anova;
mod rates;
pub mod special;
mod tukey;

pub use anova::{group_summary, one_way_anova, AnovaResult, GroupSummary};
pub use rates::{analyze_objects, normalized_counts, ObjectAnalysis, ObjectRateTable, ObjectTest};
pub use tukey::{tukey_hsd, PairComparison, TukeyResult};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} groups, got {got}")]
    TooFewGroups { needed: usize, got: usize },
    #[error("group {group} has {size} samples; at least 2 required")]
    GroupTooSmall { group: usize, size: usize },
    #[error("non-finite sample in group {group}")]
    NonFinite { group: usize },
    #[error("vlog '{0}' has no group label")]
    Unlabeled(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}
