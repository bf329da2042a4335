//! Per-model metrics and the label store that parameterizes them.

pub mod analogy;
pub mod labels;
pub mod sentiment;
pub mod triples;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::EmbeddingModel;

pub use analogy::{analogy_accuracy, analogy_accuracy_with, read_analogies, AnalogyOptions, AnalogyQuestion};
pub use labels::{LabelStore, PairLabel, Relation};
pub use sentiment::{read_documents, sentiment_accuracy, Document, LogisticRegression};
pub use triples::{read_triples, triples_score, Split, Triple};

/// Triples score on train-split triples plus label-derived triples.
pub const F_T: &str = "f_T";
/// Triples score on the held-out test split.
pub const F_T_TEST: &str = "f_T_test";
pub const F_A: &str = "f_A";
pub const ANALOGY: &str = "analogy";
pub const TRAIN_SECONDS: &str = "train_seconds";
/// `(f_T + f_A) / 2`.
pub const COMBINED: &str = "combined";

/// A metric value with the number of items it was computed over.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub value: f64,
    pub used: usize,
    pub skipped: usize,
}

/// Metric name to score, plus how many items each metric skipped.
///
/// Scores are serialized as decimal strings so a file round-trip
/// reproduces them exactly.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    #[serde(with = "decimal_map")]
    pub scores: BTreeMap<String, f64>,
    pub skipped_items: BTreeMap<String, u64>,
}

impl MetricReport {
    pub fn get(&self, metric: &str) -> Option<f64> {
        self.scores.get(metric).copied()
    }

    pub fn set(&mut self, metric: &str, score: &Score) {
        self.scores.insert(metric.to_string(), score.value);
        self.skipped_items.insert(metric.to_string(), score.skipped as u64);
    }

    /// Recompute the combined score from the components present.
    pub fn refresh_combined(&mut self) {
        match (self.get(F_T), self.get(F_A)) {
            (Some(t), Some(a)) => {
                self.scores.insert(COMBINED.to_string(), (t + a) / 2.0);
            }
            _ => {
                self.scores.remove(COMBINED);
            }
        }
    }
}

mod decimal_map {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(map.iter().map(|(k, v)| (k, v.to_string())))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw = BTreeMap::<String, String>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                let x = v
                    .parse::<f64>()
                    .map_err(|_| D::Error::custom(format!("metric `{k}`: `{v}` is not a decimal")))?;
                Ok((k, x))
            })
            .collect()
    }
}

/// Everything needed to score a model.
#[derive(Clone, Debug, Default)]
pub struct EvalSuite {
    pub triples: Vec<Triple>,
    pub documents: Vec<Document>,
    pub analogies: Vec<AnalogyQuestion>,
    pub split_seed: u64,
    pub analogy_options: AnalogyOptions,
}

impl EvalSuite {
    /// Triples of `split`; the train split also includes triples joined
    /// from the label store.
    pub fn scoring_triples(&self, split: Split, labels: &LabelStore) -> Vec<Triple> {
        let mut out: Vec<Triple> = self.triples.iter().filter(|t| t.split == split).cloned().collect();
        if split == Split::Train {
            out.extend(labels.labels_to_triples());
        }
        out
    }

    /// The train-split triples score for the current labels.
    pub fn f_t(&self, model: &EmbeddingModel, labels: &LabelStore) -> Result<Score> {
        triples_score(model, &self.scoring_triples(Split::Train, labels))
    }

    /// Compute every metric this suite has data for. Metrics whose items
    /// are all out of vocabulary are left out of `scores` but still report
    /// their skip count.
    pub fn evaluate(&self, model: &EmbeddingModel, labels: &LabelStore) -> MetricReport {
        let mut report = MetricReport::default();
        let mut record = |name: &str, n_items: usize, result: Result<Score>| {
            if n_items == 0 {
                return;
            }
            match result {
                Ok(score) => report.set(name, &score),
                Err(e) => {
                    log::debug!("{}: {name} unavailable: {e}", model.model_id);
                    report.skipped_items.insert(name.to_string(), n_items as u64);
                }
            }
        };
        let train = self.scoring_triples(Split::Train, labels);
        record(F_T, train.len(), triples_score(model, &train));
        let test = self.scoring_triples(Split::Test, labels);
        record(F_T_TEST, test.len(), triples_score(model, &test));
        record(
            F_A,
            self.documents.len(),
            sentiment_accuracy(model, &self.documents, self.split_seed),
        );
        record(
            ANALOGY,
            self.analogies.len(),
            analogy_accuracy_with(model, &self.analogies, &self.analogy_options),
        );
        report.scores.insert(TRAIN_SECONDS.to_string(), model.train_seconds);
        report.refresh_combined();
        report
    }
}

/// Cached train-split triples scores, valid for one label-store version.
#[derive(Debug, Default)]
pub struct TriplesCache {
    version: Option<u64>,
    scores: HashMap<String, Option<f64>>,
}

impl TriplesCache {
    /// The score for `model`, recomputed if the labels changed since it was
    /// cached. `None` when no triple is scorable.
    pub fn f_t(&mut self, suite: &EvalSuite, model: &EmbeddingModel, labels: &LabelStore) -> Option<f64> {
        if self.version != Some(labels.version()) {
            self.scores.clear();
            self.version = Some(labels.version());
        }
        *self
            .scores
            .entry(model.model_id.clone())
            .or_insert_with(|| suite.f_t(model, labels).ok().map(|s| s.value))
    }

    pub fn invalidate(&mut self) {
        self.version = None;
        self.scores.clear();
    }
}

/// Reject a report that violates the documented metric ranges.
pub fn check_ranges(report: &MetricReport) -> Result<()> {
    let within = |name: &str, lo: f64, hi: f64| -> Result<()> {
        match report.get(name) {
            Some(x) if !(lo..=hi).contains(&x) => Err(Error::format(format!("{name} = {x} outside [{lo}, {hi}]"))),
            _ => Ok(()),
        }
    };
    within(F_T, -2.0, 2.0)?;
    within(F_T_TEST, -2.0, 2.0)?;
    within(F_A, 0.0, 1.0)?;
    within(ANALOGY, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_roundtrip_is_exact() {
        let mut r = MetricReport::default();
        r.scores.insert(F_T.into(), 0.1 + 0.2);
        r.scores.insert(F_A.into(), 1.0 / 3.0);
        r.skipped_items.insert(F_T.into(), 2);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"0.30000000000000004\""));
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn combined_is_the_mean() {
        let mut r = MetricReport::default();
        r.scores.insert(F_T.into(), 0.2);
        r.scores.insert(F_A.into(), 0.8);
        r.refresh_combined();
        assert!((r.get(COMBINED).unwrap() - 0.5).abs() < 1e-15);
        r.scores.remove(F_A);
        r.refresh_combined();
        assert_eq!(r.get(COMBINED), None);
    }

    #[test]
    fn evaluate_reports_skips() {
        let m = EmbeddingModel::from_rows("m", &["a", "b", "c"], &[vec![1.0, 0.0], vec![1.0, 0.1], vec![0.0, 1.0]]).unwrap();
        let suite = EvalSuite {
            triples: vec![
                Triple::new("a", "b", "c", Split::Train).unwrap(),
                Triple::new("x", "y", "z", Split::Test).unwrap(),
            ],
            ..EvalSuite::default()
        };
        let r = suite.evaluate(&m, &LabelStore::new());
        assert!(r.get(F_T).unwrap() > 0.9);
        assert_eq!(r.get(F_T_TEST), None);
        assert_eq!(r.skipped_items[F_T_TEST], 1);
        assert_eq!(r.get(TRAIN_SECONDS), Some(0.0));
        check_ranges(&r).unwrap();
    }

    #[test]
    fn cache_follows_label_version() {
        let m = EmbeddingModel::from_rows(
            "m",
            &["a", "b", "c"],
            &[vec![1.0, 0.0], vec![1.0, 0.1], vec![0.0, 1.0]],
        )
        .unwrap();
        let suite = EvalSuite::default();
        let mut labels = LabelStore::new();
        let mut cache = TriplesCache::default();
        assert_eq!(cache.f_t(&suite, &m, &labels), None);
        labels.add_label("a", "b", Relation::Synonym, &|_| true).unwrap();
        labels.add_label("a", "c", Relation::Antonym, &|_| true).unwrap();
        let fresh = suite.f_t(&m, &labels).unwrap().value;
        assert_eq!(cache.f_t(&suite, &m, &labels), Some(fresh));
    }
}
