//! Post-hoc retrofitting of trained vectors to a semantic lexicon.

use std::collections::BTreeSet;
use std::io::BufRead;

use ndarray::Array2;

use super::EmbeddingModel;
use crate::error::{Error, Result};

const MAX_ROUNDS: usize = 50;
const TOLERANCE: f64 = 1e-4;
/// Keeps `retro_weight(2)` finite.
const RETRO_EPS: f64 = 1e-3;

/// Undirected word-pair relations. Pairs are stored with the smaller word
/// first, so `(a, b)` and `(b, a)` are the same edge.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    edges: BTreeSet<(String, String)>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add an edge; self-pairs are ignored. Returns whether it was new.
    pub fn insert(&mut self, a: &str, b: &str) -> bool {
        if a == b {
            return false;
        }
        let (x, y) = if a < b { (a, b) } else { (b, a) };
        self.edges.insert((x.to_string(), y.to_string()))
    }

    pub fn from_pairs<'a, I: IntoIterator<Item = (&'a str, &'a str)>>(pairs: I) -> Self {
        let mut lex = Lexicon::new();
        for (a, b) in pairs {
            lex.insert(a, b);
        }
        lex
    }

    /// Read a lexicon where each line is a word followed by its neighbors,
    /// whitespace separated. Words are lowercased.
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lex = Lexicon::new();
        for line in input.lines() {
            let line = line?;
            let mut words = line.split_whitespace().map(str::to_lowercase);
            let Some(head) = words.next() else { continue };
            for other in words {
                lex.insert(&head, &other);
            }
        }
        Ok(lex)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }
}

/// Weight on the word's own trained vector, per lexicon neighbor, as a
/// function of `retro`. Increasing on [0, 2], 0.05 at `retro = 0` and about
/// 2000 at `retro = 2`.
pub fn retro_weight(retro: f64) -> f64 {
    0.05 + retro / (2.0 - retro + RETRO_EPS)
}

/// What happened during one retrofitting run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RetrofitTrace {
    /// Largest per-word L2 change in each round.
    pub changes: Vec<f64>,
    pub converged: bool,
}

pub fn retrofit(model: &EmbeddingModel, lexicon: &Lexicon, retro: f64) -> Result<EmbeddingModel> {
    retrofit_traced(model, lexicon, retro).map(|(m, _)| m)
}

/// Jacobi iteration of
/// `q_i <- (a_i q^_i + sum_j b_ij q_j) / (a_i + sum_j b_ij)` with
/// `b_ij = 1 / |N(i)|` and `a_i = retro_weight(retro) * |N(i)|`, until the
/// largest per-word change drops below 1e-4 or 50 rounds have run.
pub fn retrofit_traced(
    model: &EmbeddingModel,
    lexicon: &Lexicon,
    retro: f64,
) -> Result<(EmbeddingModel, RetrofitTrace)> {
    if !(0.0..=2.0).contains(&retro) {
        return Err(Error::config(format!("retro must be in [0, 2], got {retro}")));
    }
    let n = model.len();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in lexicon.edges() {
        if let (Some(i), Some(j)) = (model.index_of(a), model.index_of(b)) {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
    }
    let mut trace = RetrofitTrace::default();
    if neighbors.iter().all(Vec::is_empty) {
        trace.converged = true;
        return Ok((model.clone(), trace));
    }

    let original = model.vectors().mapv(|x| x as f64);
    let mut current = original.clone();
    let weight = retro_weight(retro);
    let dim = model.dim();
    let mut next = current.clone();
    let mut acc = vec![0f64; dim];
    for _ in 0..MAX_ROUNDS {
        let mut max_change = 0f64;
        for (i, nbrs) in neighbors.iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let degree = nbrs.len() as f64;
            let alpha = weight * degree;
            let beta = 1.0 / degree;
            acc.iter_mut()
                .zip(original.row(i))
                .for_each(|(a, &q)| *a = alpha * q);
            for &j in nbrs {
                acc.iter_mut()
                    .zip(current.row(j))
                    .for_each(|(a, &q)| *a += beta * q);
            }
            let denom = alpha + 1.0;
            let mut change = 0f64;
            for ((dst, &a), &old) in next.row_mut(i).iter_mut().zip(&acc).zip(current.row(i)) {
                *dst = a / denom;
                change += (*dst - old) * (*dst - old);
            }
            max_change = max_change.max(change.sqrt());
        }
        std::mem::swap(&mut current, &mut next);
        trace.changes.push(max_change);
        if max_change < TOLERANCE {
            trace.converged = true;
            break;
        }
    }

    let vectors: Array2<f32> = current.mapv(|x| x as f32);
    let out = EmbeddingModel::new(
        model.model_id.clone(),
        model.corpus_id.clone(),
        model.hyper.clone(),
        model.train_seconds,
        model.shared_vocab(),
        vectors,
    )?;
    Ok((out, trace))
}
