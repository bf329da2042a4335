//! Comparison structures behind the workbench views: neighbor queries, the
//! nearest-neighbor heatmap, t-SNE projections, brushing filters and
//! pairwise correlations.

pub mod cluster;
pub mod correlation;
pub mod filter;
pub mod heatmap;
pub mod neighbors;
pub mod projection;
pub mod tsne;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{self, MetricReport};
use crate::hyper::{DimValue, HyperParams};

pub use cluster::{hierarchical_cluster, Dendrogram, Merge};
pub use correlation::{pairwise_correlations, pearson, Correlation};
pub use filter::{filter_models, Constraint, FilterSpec};
pub use heatmap::{build_heatmap, sort_heatmap, ColumnMode, HeatmapOptions, HeatmapView, SortMode};
pub use neighbors::{nearest_neighbors, Neighbor, QueryExpr, DEFAULT_K};
pub use projection::{explorer_words, project_tsne, ExplorerWords, ProjectionJob};
pub use tsne::{Projection, ProjectedWord, TsneOptions};

/// Metric names every population is assumed to know about, even before a
/// model reports them.
pub const STANDARD_METRICS: [&str; 6] = [
    eval::F_T,
    eval::F_T_TEST,
    eval::F_A,
    eval::ANALOGY,
    eval::TRAIN_SECONDS,
    eval::COMBINED,
];

/// What the views need to know about one trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub hyper: HyperParams,
    pub metrics: MetricReport,
}

impl ModelSummary {
    /// Value of a hyperparameter or metric; `None` when the model has no
    /// value for a metric.
    pub fn dimension(&self, name: &str) -> Option<DimValue> {
        self.hyper
            .dimension(name)
            .or_else(|| self.metrics.get(name).map(DimValue::Number))
    }
}

/// Whether `name` is a hyperparameter, a standard metric, or a metric some
/// model in `population` reports.
pub fn known_dimension(population: &[ModelSummary], name: &str) -> bool {
    HyperParams::is_field(name)
        || STANDARD_METRICS.contains(&name)
        || population.iter().any(|m| m.metrics.scores.contains_key(name))
}

pub(crate) fn check_dimension(population: &[ModelSummary], name: &str) -> Result<()> {
    if known_dimension(population, name) {
        Ok(())
    } else {
        Err(Error::unknown_dimension(name))
    }
}

/// Hyperparameters in declaration order, then every metric reported by the
/// population in name order.
pub fn dimensions(population: &[ModelSummary]) -> Vec<String> {
    let metrics: BTreeSet<&str> = population
        .iter()
        .flat_map(|m| m.metrics.scores.keys().map(String::as_str))
        .collect();
    HyperParams::FIELDS
        .iter()
        .copied()
        .chain(metrics)
        .map(str::to_string)
        .collect()
}
