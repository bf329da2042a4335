//! Corpus ingestion: tokenization, vocabulary building and subsampled token
//! streams.
//!
//! Lines are sentences. Tokens are lowercased, whitespace-separated, with
//! non-alphanumeric characters stripped from both edges.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MIN_COUNT: u64 = 5;

/// Split one line into normalized tokens.
pub fn tokenize(line: &str) -> impl Iterator<Item = String> + '_ {
    line.split_whitespace().filter_map(|raw| {
        let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
        if trimmed.is_empty() {
            None
        } else {
            Some(trimmed.to_lowercase())
        }
    })
}

/// Retained words with their corpus counts, most frequent first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    total_tokens: u64,
    min_count: u64,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    words: Vec<String>,
    counts: Vec<u64>,
    total_tokens: u64,
    min_count: u64,
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;

    fn try_from(r: VocabularyRepr) -> Result<Self> {
        Vocabulary::from_parts(r.words, r.counts, r.total_tokens, r.min_count)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            words: v.words,
            counts: v.counts,
            total_tokens: v.total_tokens,
            min_count: v.min_count,
        }
    }
}

impl Vocabulary {
    /// Assemble a vocabulary from already-counted words. Rows keep the given
    /// order; the invariants on counts and uniqueness are checked.
    pub fn from_parts(
        words: Vec<String>,
        counts: Vec<u64>,
        total_tokens: u64,
        min_count: u64,
    ) -> Result<Self> {
        if words.len() != counts.len() {
            return Err(Error::format(format!(
                "{} words but {} counts",
                words.len(),
                counts.len()
            )));
        }
        if let Some(c) = counts.iter().find(|&&c| c < min_count) {
            return Err(Error::format(format!(
                "count {c} below min_count {min_count}"
            )));
        }
        let sum: u64 = counts.iter().sum();
        if sum > total_tokens {
            return Err(Error::format(format!(
                "counts sum to {sum}, more than total_tokens {total_tokens}"
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::format(format!("duplicate word `{w}`")));
            }
        }
        Ok(Vocabulary {
            words,
            counts,
            total_tokens,
            min_count,
            index,
        })
    }

    /// A vocabulary with no frequency information, as used for vectors
    /// imported from a plain text file.
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let n = words.len();
        Self::from_parts(words, vec![0; n], 0, 0)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn count(&self, idx: usize) -> u64 {
        self.counts[idx]
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Relative corpus frequency `count / total_tokens`.
    pub fn frequency(&self, idx: usize) -> f64 {
        if self.total_tokens == 0 {
            0.0
        } else {
            self.counts[idx] as f64 / self.total_tokens as f64
        }
    }

    /// Write `word<TAB>count` lines in vocabulary order.
    pub fn write_counts<W: Write>(&self, mut out: W) -> Result<()> {
        for (w, c) in self.words.iter().zip(&self.counts) {
            writeln!(out, "{w}\t{c}")?;
        }
        Ok(())
    }

    /// Read a `word<TAB>count` listing. The total is taken as the sum of the
    /// listed counts.
    pub fn read_counts<R: BufRead>(input: R, min_count: u64) -> Result<Self> {
        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (w, c) = line.split_once('\t').ok_or_else(|| {
                Error::format(format!("line {}: expected word<TAB>count", lineno + 1))
            })?;
            let c: u64 = c
                .trim()
                .parse()
                .map_err(|_| Error::format(format!("line {}: bad count `{c}`", lineno + 1)))?;
            words.push(w.to_string());
            counts.push(c);
        }
        let total = counts.iter().sum();
        Self::from_parts(words, counts, total, min_count)
    }
}

/// Count tokens in `corpus_text` and keep those seen at least `min_count`
/// times, ordered by descending count with ties broken lexicographically.
pub fn build_vocabulary(corpus_text: &str, min_count: u64) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::config("min_count must be at least 1"));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut total = 0u64;
    for line in corpus_text.lines() {
        for tok in tokenize(line) {
            total += 1;
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut kept: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let (words, counts) = kept.into_iter().unzip();
    Vocabulary::from_parts(words, counts, total, min_count)
}

/// Probability that one occurrence of a word with relative frequency `freq`
/// is dropped under threshold `t`.
pub fn discard_probability(freq: f64, t: f64) -> f64 {
    if freq <= 0.0 {
        return 0.0;
    }
    (1.0 - (t / freq).sqrt()).max(0.0)
}

/// Sentences of vocabulary indices, after out-of-vocabulary removal and
/// optional subsampling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenStream {
    pub sentences: Vec<Vec<u32>>,
    pub rng_seed: u64,
}

impl TokenStream {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.iter().all(Vec::is_empty)
    }
}

/// Map the corpus onto `vocab`, dropping out-of-vocabulary tokens and
/// discarding frequent words with probability `1 - sqrt(t / f(w))`.
/// `threshold = None` keeps every in-vocabulary token.
pub fn subsample_stream(
    vocab: &Vocabulary,
    corpus_text: &str,
    threshold: Option<f64>,
    seed: u64,
) -> TokenStream {
    let discard: Option<Vec<f64>> = threshold.map(|t| {
        (0..vocab.len())
            .map(|i| discard_probability(vocab.frequency(i), t))
            .collect()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sentences = Vec::new();
    for line in corpus_text.lines() {
        let mut sentence = Vec::new();
        for tok in tokenize(line) {
            let Some(idx) = vocab.index_of(&tok) else {
                continue;
            };
            if let Some(p) = &discard {
                let u: f64 = rng.random();
                if u < p[idx] {
                    continue;
                }
            }
            sentence.push(idx as u32);
        }
        if !sentence.is_empty() {
            sentences.push(sentence);
        }
    }
    TokenStream {
        sentences,
        rng_seed: seed,
    }
}
