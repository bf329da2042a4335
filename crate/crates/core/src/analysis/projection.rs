//! Query-anchored word sets for the embedding explorer and their layouts.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::eval::LabelStore;
use crate::trainer::EmbeddingModel;

use super::neighbors::{nearest_neighbors, QueryExpr};
use super::tsne::{Projection, ProjectedWord, Tsne, TsneOptions};

/// The words laid out for one query.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplorerWords {
    /// Focus words first, then neighbors by rank, then injected words.
    pub words: Vec<String>,
    pub focus: Vec<String>,
    pub injected: Vec<String>,
}

/// Focus words of `query`, its `k` nearest neighbors, and every labeled
/// partner of a focus word that the model knows.
pub fn explorer_words(model: &EmbeddingModel, query: &QueryExpr, k: usize, labels: &LabelStore) -> Result<ExplorerWords> {
    let neighbors = nearest_neighbors(model, query, k)?;
    let focus = query.focus_words();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut words = Vec::new();
    for w in focus.iter().cloned().chain(neighbors.into_iter().map(|n| n.word)) {
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    let mut injected = Vec::new();
    for label in labels.list_labels() {
        for f in &focus {
            if let Some(partner) = label.partner(f) {
                if model.vocab().contains(partner) && seen.insert(partner.to_string()) {
                    words.push(partner.to_string());
                    injected.push(partner.to_string());
                }
            }
        }
    }
    Ok(ExplorerWords { words, focus, injected })
}

/// A projection being optimized. `snapshot` can be taken at any point; the
/// first one callers should surface is after [`ProjectionJob::prewarm`].
#[derive(Clone, Debug)]
pub struct ProjectionJob {
    model_id: String,
    words: ExplorerWords,
    tsne: Tsne,
}

impl ProjectionJob {
    /// Set up t-SNE over the unit vectors of `words`. Words shared with
    /// `prior` (the previous model's layout) start at their old positions.
    pub fn new(model: &EmbeddingModel, words: ExplorerWords, opts: TsneOptions, prior: Option<&Projection>) -> Result<Self> {
        let mut points = Vec::with_capacity(words.words.len());
        for w in &words.words {
            let v = model.vector(w).ok_or_else(|| Error::oov(w))?;
            let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
            let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            points.push(v.iter().map(|&x| x as f64 * scale).collect::<Vec<f64>>());
        }
        let init: Option<Vec<Option<[f64; 2]>>> =
            prior.map(|p| words.words.iter().map(|w| p.position(w)).collect());
        let tsne = Tsne::new(&points, opts, init.as_deref())?;
        Ok(ProjectionJob {
            model_id: model.model_id.clone(),
            words,
            tsne,
        })
    }

    pub fn tsne(&self) -> &Tsne {
        &self.tsne
    }

    pub fn prewarm(&mut self) {
        self.tsne.prewarm();
    }

    pub fn run_until(&mut self, iteration: usize) {
        self.tsne.run_until(iteration);
    }

    pub fn run_to_end(&mut self) {
        self.tsne.run_to_end();
    }

    pub fn is_done(&self) -> bool {
        self.tsne.is_done()
    }

    pub fn snapshot(&self) -> Projection {
        Projection {
            model_id: self.model_id.clone(),
            points: self
                .words
                .words
                .iter()
                .zip(self.tsne.layout())
                .map(|(w, xy)| ProjectedWord {
                    word: w.clone(),
                    x: xy[0],
                    y: xy[1],
                })
                .collect(),
            focus: self.words.focus.clone(),
            injected: self.words.injected.clone(),
            iteration: self.tsne.iteration(),
            done: self.tsne.is_done(),
            kl_divergence: self.tsne.kl_divergence(),
        }
    }
}

/// Lay out `words` to completion.
pub fn project_tsne(model: &EmbeddingModel, words: ExplorerWords, opts: TsneOptions, prior: Option<&Projection>) -> Result<Projection> {
    let mut job = ProjectionJob::new(model, words, opts, prior)?;
    job.run_to_end();
    Ok(job.snapshot())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Relation;

    fn model() -> EmbeddingModel {
        let words = ["good", "great", "fine", "bad", "awful", "okay", "table"];
        let rows: Vec<Vec<f32>> = vec![
            vec![1.0, 0.1, 0.0],
            vec![0.9, 0.2, 0.0],
            vec![0.8, 0.0, 0.1],
            vec![-1.0, 0.1, 0.0],
            vec![-0.9, 0.0, 0.1],
            vec![0.5, 0.5, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        EmbeddingModel::from_rows("m", &words, &rows).unwrap()
    }

    #[test]
    fn labeled_partners_are_injected() {
        let m = model();
        let mut labels = LabelStore::new();
        labels.add_label("good", "table", Relation::Antonym, &|_| true).unwrap();
        labels.add_label("bad", "awful", Relation::Synonym, &|_| true).unwrap();
        let w = explorer_words(&m, &QueryExpr::single("good"), 2, &labels).unwrap();
        assert_eq!(w.focus, vec!["good"]);
        assert_eq!(w.words, vec!["good", "great", "fine", "table"]);
        assert_eq!(w.injected, vec!["table"]);
    }

    #[test]
    fn snapshot_covers_every_word() {
        let m = model();
        let w = explorer_words(&m, &QueryExpr::single("good"), 6, &LabelStore::new()).unwrap();
        let opts = TsneOptions {
            total_iters: 200,
            ..Default::default()
        };
        let mut job = ProjectionJob::new(&m, w.clone(), opts.clone(), None).unwrap();
        job.prewarm();
        let early = job.snapshot();
        assert_eq!(early.iteration, 150);
        assert!(!early.done);
        assert_eq!(early.points.len(), 7);
        let done = project_tsne(&m, w.clone(), opts.clone(), Some(&early)).unwrap();
        assert!(done.done);
        assert!(done.points.iter().all(|p| p.x.is_finite() && p.y.is_finite()));
        let restarted = ProjectionJob::new(&m, w, opts, Some(&early)).unwrap();
        assert_eq!(restarted.snapshot().position("great"), early.position("great"));
    }
}
