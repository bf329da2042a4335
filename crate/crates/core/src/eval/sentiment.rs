//! Downstream sentiment accuracy: logistic regression on document centroids.

use std::io::BufRead;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Score;
use crate::corpus::tokenize;
use crate::error::{Error, Result};
use crate::trainer::EmbeddingModel;

pub const METRIC: &str = "f_A";

/// Fraction of documents used for training; the rest is held out.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub text: String,
    pub positive: bool,
}

/// Parse `label<TAB>text` lines where the label is one of
/// `pos`/`neg`/`1`/`0`/`+`/`-`.
pub fn read_documents<R: BufRead>(input: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line.split_once('\t').ok_or_else(|| {
            Error::format(format!("documents line {}: expected label<TAB>text", lineno + 1))
        })?;
        let positive = match label.trim() {
            "pos" | "1" | "+" | "positive" => true,
            "neg" | "0" | "-" | "negative" => false,
            other => {
                return Err(Error::format(format!(
                    "documents line {}: unknown label `{other}`",
                    lineno + 1
                )))
            }
        };
        docs.push(Document {
            text: text.to_string(),
            positive,
        });
    }
    Ok(docs)
}

/// Fixed recipe for the classifier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticOptions {
    pub steps: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            steps: 500,
            learning_rate: 0.1,
            l2: 1e-4,
        }
    }
}

/// Binary logistic regression with a bias, fit by full-batch gradient
/// descent on the mean log loss plus `l2 / 2 * |w|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticRegression {
    pub weights: Array1<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LogisticRegression {
    pub fn fit(features: &Array2<f64>, labels: &[bool], opts: &LogisticOptions) -> Self {
        let (n, d) = features.dim();
        let y: Array1<f64> = labels.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect();
        let mut weights = Array1::<f64>::zeros(d);
        let mut bias = 0.0;
        let inv_n = 1.0 / n.max(1) as f64;
        for _ in 0..opts.steps {
            let z = features.dot(&weights) + bias;
            let residual = z.mapv(sigmoid) - &y;
            let grad_w = features.t().dot(&residual) * inv_n + &weights * opts.l2;
            let grad_b = residual.sum() * inv_n;
            weights.scaled_add(-opts.learning_rate, &grad_w);
            bias -= opts.learning_rate * grad_b;
        }
        LogisticRegression { weights, bias }
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> bool {
        x.dot(&self.weights) + self.bias >= 0.0
    }

    pub fn accuracy(&self, features: &Array2<f64>, labels: &[bool]) -> f64 {
        let correct = features
            .rows()
            .into_iter()
            .zip(labels)
            .filter(|(x, &y)| self.predict(x.view()) == y)
            .count();
        correct as f64 / labels.len() as f64
    }
}

/// Seeded 80/20 partition of `0..n` into (train, test) index lists.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (n as f64 * TRAIN_FRACTION).round() as usize;
    let test = idx.split_off(n_train);
    (idx, test)
}

/// Mean vector of the document's in-vocabulary tokens, or `None` when it
/// has none.
pub fn centroid(model: &EmbeddingModel, text: &str) -> Option<Array1<f64>> {
    let mut acc = Array1::<f64>::zeros(model.dim());
    let mut n = 0usize;
    for tok in tokenize(text) {
        if let Some(v) = model.vector(&tok) {
            acc.zip_mut_with(&v, |a, &x| *a += x as f64);
            n += 1;
        }
    }
    (n > 0).then(|| acc / n as f64)
}

/// Held-out accuracy of a logistic-regression classifier over document
/// centroids. Features are standardized with statistics from the training
/// part only.
pub fn sentiment_accuracy(model: &EmbeddingModel, documents: &[Document], split_seed: u64) -> Result<Score> {
    sentiment_accuracy_with(model, documents, split_seed, &LogisticOptions::default())
}

pub fn sentiment_accuracy_with(
    model: &EmbeddingModel,
    documents: &[Document],
    split_seed: u64,
    opts: &LogisticOptions,
) -> Result<Score> {
    if documents.is_empty() {
        return Err(Error::unavailable(METRIC, "no documents"));
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for doc in documents {
        if let Some(c) = centroid(model, &doc.text) {
            rows.push(c);
            labels.push(doc.positive);
        }
    }
    let skipped = documents.len() - rows.len();
    let (train_idx, test_idx) = split_indices(rows.len(), split_seed);
    let has_both = |idx: &[usize]| idx.iter().any(|&i| labels[i]) && idx.iter().any(|&i| !labels[i]);
    if !has_both(&train_idx) || !has_both(&test_idx) {
        return Err(Error::unavailable(METRIC, "a class is missing after splitting"));
    }

    let gather = |idx: &[usize]| {
        let mut m = Array2::<f64>::zeros((idx.len(), model.dim()));
        for (r, &i) in idx.iter().enumerate() {
            m.row_mut(r).assign(&rows[i]);
        }
        (m, idx.iter().map(|&i| labels[i]).collect::<Vec<_>>())
    };
    let (mut x_train, y_train) = gather(&train_idx);
    let (mut x_test, y_test) = gather(&test_idx);

    let mean = x_train.mean_axis(Axis(0)).unwrap();
    let std = x_train.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
    for x in [&mut x_train, &mut x_test] {
        *x -= &mean;
        *x /= &std;
    }

    let clf = LogisticRegression::fit(&x_train, &y_train, opts);
    Ok(Score {
        value: clf.accuracy(&x_test, &y_test),
        used: rows.len(),
        skipped,
    })
}
