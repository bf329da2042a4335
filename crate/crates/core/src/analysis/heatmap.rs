//! The nearest-neighbor heatmap: loaded models as rows, related words as
//! columns, query-to-word cosine in each cell.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyper::HyperParams;
use crate::trainer::EmbeddingModel;

use super::cluster::hierarchical_cluster;
use super::neighbors::{nearest_neighbors, query_cosine, QueryExpr, DEFAULT_K};
use super::{check_dimension, ModelSummary};

/// Default cap on the number of columns.
pub const DEFAULT_WORD_BUDGET: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnMode {
    Compact,
    Zoomed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SortMode {
    Loading,
    Cluster,
    Hyperparameter(String),
    Metric(String),
}

impl fmt::Display for SortMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SortMode::Loading => f.write_str("loading"),
            SortMode::Cluster => f.write_str("cluster"),
            SortMode::Hyperparameter(n) => write!(f, "hyperparameter:{n}"),
            SortMode::Metric(n) => write!(f, "metric:{n}"),
        }
    }
}

impl FromStr for SortMode {
    type Err = Error;

    /// `loading`, `cluster`, `hyperparameter:<name>` or `metric:<name>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Query {
            message: format!("unknown sort mode `{s}`"),
            token: Some(s.to_string()),
        };
        match s.split_once(':') {
            None if s == "loading" => Ok(SortMode::Loading),
            None if s == "cluster" => Ok(SortMode::Cluster),
            Some(("hyperparameter", name)) if !name.is_empty() => Ok(SortMode::Hyperparameter(name.to_string())),
            Some(("metric", name)) if !name.is_empty() => Ok(SortMode::Metric(name.to_string())),
            _ => Err(bad()),
        }
    }
}

impl Serialize for SortMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SortMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapView {
    pub query: String,
    pub row_models: Vec<String>,
    /// Position of each row's model in the load order.
    pub row_load_order: Vec<usize>,
    pub col_words: Vec<String>,
    /// Best (smallest, 1-based) neighbor rank of each column across models.
    pub col_rank: Vec<usize>,
    /// `None` where the model lacks the word or the query.
    pub cells: Vec<Vec<Option<f64>>>,
    pub col_mode: Vec<ColumnMode>,
    pub sort_mode: SortMode,
    pub k: usize,
    /// Population variance of each column's non-null cells. Exposed as a
    /// hook for agreement-based zooming.
    pub column_variance: Vec<Option<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeatmapOptions {
    pub k: usize,
    pub word_budget: usize,
    /// Index of the model whose top-K columns are zoomed. Defaults to the
    /// first model that can answer the query.
    pub active: Option<usize>,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        HeatmapOptions {
            k: DEFAULT_K,
            word_budget: DEFAULT_WORD_BUDGET,
            active: None,
        }
    }
}

fn variance(values: impl Iterator<Item = f64>) -> Option<f64> {
    let xs: Vec<f64> = values.collect();
    if xs.is_empty() {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    Some(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64)
}

/// Build the view over `models` in load order.
pub fn build_heatmap(models: &[&EmbeddingModel], query: &QueryExpr, opts: &HeatmapOptions) -> Result<HeatmapView> {
    if models.is_empty() {
        return Err(Error::config("heatmap needs at least one model"));
    }
    if opts.word_budget == 0 {
        return Err(Error::config("word budget must be at least 1"));
    }
    let mut queries: Vec<Option<Vec<f64>>> = Vec::with_capacity(models.len());
    let mut tops: Vec<Option<Vec<String>>> = Vec::with_capacity(models.len());
    let mut first_error = None;
    for m in models {
        match nearest_neighbors(m, query, opts.k) {
            Ok(n) => {
                queries.push(Some(query.vector(m)?));
                tops.push(Some(n.into_iter().map(|n| n.word).collect()));
            }
            Err(e @ Error::Query { .. }) => {
                first_error.get_or_insert(e);
                queries.push(None);
                tops.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    if tops.iter().all(Option::is_none) {
        return Err(first_error.expect("every model failed"));
    }

    let mut best: BTreeMap<&str, usize> = BTreeMap::new();
    for top in tops.iter().flatten() {
        for (rank, w) in top.iter().enumerate() {
            let r = best.entry(w.as_str()).or_insert(rank + 1);
            *r = (*r).min(rank + 1);
        }
    }
    let mut cols: Vec<(usize, &str)> = best.into_iter().map(|(w, r)| (r, w)).collect();
    cols.sort();
    cols.truncate(opts.word_budget);

    let active = match opts.active {
        Some(i) if i < models.len() => i,
        Some(i) => return Err(Error::config(format!("active model {i} out of range"))),
        None => tops.iter().position(Option::is_some).unwrap(),
    };
    let zoomed: &[String] = tops[active].as_deref().unwrap_or(&[]);

    let cells: Vec<Vec<Option<f64>>> = models
        .iter()
        .zip(&queries)
        .map(|(m, q)| {
            cols.iter()
                .map(|(_, w)| {
                    let q = q.as_ref()?;
                    let v = m.vector(w)?;
                    Some(query_cosine(q, v.as_slice().expect("contiguous row")))
                })
                .collect()
        })
        .collect();
    let column_variance = (0..cols.len())
        .map(|c| variance(cells.iter().filter_map(|row| row[c])))
        .collect();

    Ok(HeatmapView {
        query: query
            .terms()
            .iter()
            .map(|(w, s)| if *s < 0.0 { format!("-{w}") } else { w.clone() })
            .collect::<Vec<_>>()
            .join(" "),
        row_models: models.iter().map(|m| m.model_id.clone()).collect(),
        row_load_order: (0..models.len()).collect(),
        col_mode: cols
            .iter()
            .map(|(_, w)| {
                if zoomed.iter().any(|z| z == w) {
                    ColumnMode::Zoomed
                } else {
                    ColumnMode::Compact
                }
            })
            .collect(),
        col_rank: cols.iter().map(|(r, _)| *r).collect(),
        col_words: cols.into_iter().map(|(_, w)| w.to_string()).collect(),
        cells,
        sort_mode: SortMode::Loading,
        k: opts.k,
        column_variance,
    })
}

fn permute<T: Clone>(items: &[T], order: &[usize]) -> Vec<T> {
    order.iter().map(|&i| items[i].clone()).collect()
}

fn sort_rows_by_value(view: &HeatmapView, value: impl Fn(&str) -> Option<f64>) -> Vec<usize> {
    let keys: Vec<Option<f64>> = view.row_models.iter().map(|id| value(id)).collect();
    let mut order: Vec<usize> = (0..view.row_models.len()).collect();
    // Ascending; models without a value go last.
    order.sort_by(|&a, &b| {
        let by_value = match (keys[a], keys[b]) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_value.then(view.row_load_order[a].cmp(&view.row_load_order[b]))
    });
    order
}

/// Reorder rows (and for cluster mode, columns) of `view`. `population`
/// supplies hyperparameter and metric values by model id.
pub fn sort_heatmap(view: &HeatmapView, mode: &SortMode, population: &[ModelSummary]) -> Result<HeatmapView> {
    let lookup = |id: &str, name: &str| {
        population
            .iter()
            .find(|m| m.model_id == id)
            .and_then(|m| m.dimension(name))
            .map(|d| d.as_f64())
    };
    let n_cols = view.col_words.len();
    let mut col_order: Vec<usize> = (0..n_cols).collect();
    col_order.sort_by(|&a, &b| {
        view.col_rank[a]
            .cmp(&view.col_rank[b])
            .then_with(|| view.col_words[a].cmp(&view.col_words[b]))
    });
    let row_order = match mode {
        SortMode::Loading => {
            let mut order: Vec<usize> = (0..view.row_models.len()).collect();
            order.sort_by_key(|&r| view.row_load_order[r]);
            order
        }
        SortMode::Hyperparameter(name) => {
            if !HyperParams::is_field(name) {
                return Err(Error::unknown_dimension(name));
            }
            sort_rows_by_value(view, |id| lookup(id, name))
        }
        SortMode::Metric(name) => {
            if HyperParams::is_field(name) {
                return Err(Error::unknown_dimension(name));
            }
            check_dimension(population, name)?;
            sort_rows_by_value(view, |id| lookup(id, name))
        }
        SortMode::Cluster => {
            let imputed: Vec<Vec<f64>> = view
                .cells
                .iter()
                .map(|row| row.iter().map(|c| c.unwrap_or(0.0)).collect())
                .collect();
            let columns: Vec<Vec<f64>> = (0..n_cols)
                .map(|c| imputed.iter().map(|row| row[c]).collect())
                .collect();
            col_order = hierarchical_cluster(&columns).leaf_order;
            hierarchical_cluster(&imputed).leaf_order
        }
    };
    let cells: Vec<Vec<Option<f64>>> = row_order
        .iter()
        .map(|&r| permute(&view.cells[r], &col_order))
        .collect();
    Ok(HeatmapView {
        query: view.query.clone(),
        row_models: permute(&view.row_models, &row_order),
        row_load_order: permute(&view.row_load_order, &row_order),
        col_words: permute(&view.col_words, &col_order),
        col_rank: permute(&view.col_rank, &col_order),
        cells,
        col_mode: permute(&view.col_mode, &col_order),
        sort_mode: mode.clone(),
        k: view.k,
        column_variance: permute(&view.column_variance, &col_order),
    })
}
