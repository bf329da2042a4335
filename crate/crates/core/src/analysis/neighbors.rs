//! k-nearest-neighbor and compound-vector queries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::EmbeddingModel;

/// Default neighbor count for views.
pub const DEFAULT_K: usize = 15;

/// A signed combination of words, e.g. `king -queen woman`.
///
/// A word prefixed with `-`, `--` or `−`, or preceded by a standalone `-`
/// token, is subtracted; everything else is added. Words are lowercased.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryExpr {
    terms: Vec<(String, f64)>,
}

impl QueryExpr {
    pub fn parse(expr: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut pending_sign = 1.0;
        for raw in expr.split_whitespace() {
            match raw {
                "+" => {
                    pending_sign = 1.0;
                    continue;
                }
                "-" | "--" | "−" => {
                    pending_sign = -1.0;
                    continue;
                }
                _ => {}
            }
            let (sign, word) = if let Some(rest) = raw.strip_prefix("--").or_else(|| raw.strip_prefix('−')) {
                (-1.0, rest)
            } else if let Some(rest) = raw.strip_prefix('-') {
                (-1.0, rest)
            } else if let Some(rest) = raw.strip_prefix('+') {
                (1.0, rest)
            } else {
                (1.0, raw)
            };
            if word.is_empty() {
                return Err(Error::Query {
                    message: format!("dangling operator `{raw}`"),
                    token: Some(raw.to_string()),
                });
            }
            terms.push((word.to_lowercase(), sign * pending_sign));
            pending_sign = 1.0;
        }
        if terms.is_empty() {
            return Err(Error::Query {
                message: "empty query".into(),
                token: None,
            });
        }
        Ok(QueryExpr { terms })
    }

    /// The word for a plain single-word query.
    pub fn single(word: &str) -> Self {
        QueryExpr {
            terms: vec![(word.to_lowercase(), 1.0)],
        }
    }

    /// Words as written, with their signs.
    pub fn terms(&self) -> &[(String, f64)] {
        &self.terms
    }

    /// Net coefficient per word; words that cancel out are dropped.
    pub fn net(&self) -> BTreeMap<&str, f64> {
        let mut net: BTreeMap<&str, f64> = BTreeMap::new();
        for (w, c) in &self.terms {
            *net.entry(w.as_str()).or_insert(0.0) += c;
        }
        net.retain(|_, c| *c != 0.0);
        net
    }

    /// Words with a positive net coefficient.
    pub fn focus_words(&self) -> Vec<String> {
        self.net()
            .into_iter()
            .filter(|(_, c)| *c > 0.0)
            .map(|(w, _)| w.to_string())
            .collect()
    }

    /// First word missing from `model`, if any.
    pub fn missing_word(&self, model: &EmbeddingModel) -> Option<&str> {
        self.terms
            .iter()
            .map(|(w, _)| w.as_str())
            .find(|w| !model.vocab().contains(w))
    }

    /// Sum of net coefficients times unit-normalized word vectors.
    pub fn vector(&self, model: &EmbeddingModel) -> Result<Vec<f64>> {
        if let Some(w) = self.missing_word(model) {
            return Err(Error::oov(w));
        }
        let net = self.net();
        if net.is_empty() {
            return Err(Error::Query {
                message: "query terms cancel out".into(),
                token: None,
            });
        }
        let mut q = vec![0f64; model.dim()];
        for (word, coef) in net {
            let v = model.vector(word).expect("checked above");
            let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            for (qi, &x) in q.iter_mut().zip(v.iter()) {
                *qi += coef * (x as f64 / norm);
            }
        }
        Ok(q)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub word: String,
    pub similarity: f64,
}

/// Cosine of a double-precision query against a stored vector, clamped to
/// [-1, 1]. Zero vectors give 0.
pub fn query_cosine(q: &[f64], v: &[f32]) -> f64 {
    let (mut dot, mut nq, mut nv) = (0f64, 0f64, 0f64);
    for (&a, &b) in q.iter().zip(v) {
        let b = b as f64;
        dot += a * b;
        nq += a * a;
        nv += b * b;
    }
    if nq == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nq.sqrt() * nv.sqrt())).clamp(-1.0, 1.0)
}

/// The `k` words most similar to the query, excluding the query's own
/// words (those with a non-zero net coefficient). Sorted by descending
/// similarity, ties broken lexicographically.
pub fn nearest_neighbors(model: &EmbeddingModel, query: &QueryExpr, k: usize) -> Result<Vec<Neighbor>> {
    if k == 0 {
        return Err(Error::Query {
            message: "k must be at least 1".into(),
            token: Some("k".into()),
        });
    }
    let q = query.vector(model)?;
    let net = query.net();
    let words = model.vocab().words();
    let mut scored: Vec<(f64, usize)> = model
        .vectors()
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !net.contains_key(words[*i].as_str()))
        .map(|(i, row)| (query_cosine(&q, row.as_slice().unwrap()), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| words[a.1].cmp(&words[b.1])));
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .map(|(s, i)| Neighbor {
            word: words[i].clone(),
            similarity: s,
        })
        .collect())
}
