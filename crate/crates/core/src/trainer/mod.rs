//! word2vec-style training of a single embedding model.

mod huffman;
mod io;
mod retrofit;
pub mod sgd;

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{TokenStream, Vocabulary};
use crate::error::{Error, Result};
use crate::hyper::{model_id, Architecture, HyperParams};

pub use huffman::HuffmanTree;
pub use io::{load_model, save_model, save_model_text};
pub use retrofit::{retrofit, retrofit_traced, retro_weight, Lexicon, RetrofitTrace};

/// Floor of the linearly decayed learning rate, as a fraction of `alpha`.
pub const MIN_ALPHA_FRACTION: f64 = 1e-4;

/// Exponent applied to word counts for the noise distribution.
pub const NOISE_EXPONENT: f64 = 0.75;

/// A vocabulary with one dense vector per word and the provenance of how
/// the vectors were produced.
#[derive(Clone, Debug)]
pub struct EmbeddingModel {
    pub model_id: String,
    pub corpus_id: String,
    pub hyper: HyperParams,
    pub train_seconds: f64,
    vocab: Arc<Vocabulary>,
    vectors: Array2<f32>,
    unit: OnceLock<Array2<f32>>,
}

impl EmbeddingModel {
    pub fn new(
        model_id: String,
        corpus_id: String,
        hyper: HyperParams,
        train_seconds: f64,
        vocab: Arc<Vocabulary>,
        vectors: Array2<f32>,
    ) -> Result<Self> {
        if vectors.nrows() != vocab.len() {
            return Err(Error::format(format!(
                "{} vectors for a vocabulary of {}",
                vectors.nrows(),
                vocab.len()
            )));
        }
        if vectors.ncols() != hyper.size {
            return Err(Error::format(format!(
                "vectors have {} columns, size is {}",
                vectors.ncols(),
                hyper.size
            )));
        }
        if vectors.iter().any(|x| !x.is_finite()) {
            return Err(Error::format("non-finite vector component"));
        }
        let vectors = vectors.as_standard_layout().into_owned();
        Ok(EmbeddingModel {
            model_id,
            corpus_id,
            hyper,
            train_seconds,
            vocab,
            vectors,
            unit: OnceLock::new(),
        })
    }

    /// Build a model directly from word/vector pairs. Mostly useful for
    /// hand-constructed embeddings.
    pub fn from_rows<S: AsRef<str>>(model_id: &str, words: &[S], rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::format("vectors must have at least one component"));
        }
        let mut vectors = Array2::zeros((rows.len(), dim));
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::format(format!("row {i} has {} values, expected {dim}", r.len())));
            }
            vectors.row_mut(i).assign(&ArrayView1::from(r.as_slice()));
        }
        let vocab = Vocabulary::from_words(words.iter().map(|w| w.as_ref().to_string()).collect())?;
        let hyper = HyperParams {
            size: dim,
            ..HyperParams::default()
        };
        Self::new(model_id.to_string(), String::new(), hyper, 0.0, Arc::new(vocab), vectors)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn shared_vocab(&self) -> Arc<Vocabulary> {
        Arc::clone(&self.vocab)
    }

    pub fn vectors(&self) -> &Array2<f32> {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.vocab.index_of(word)
    }

    pub fn vector(&self, word: &str) -> Option<ArrayView1<'_, f32>> {
        self.index_of(word).map(|i| self.vectors.row(i))
    }

    /// Row-normalized copy of the vectors, computed once. Zero rows stay
    /// zero.
    pub fn unit_vectors(&self) -> &Array2<f32> {
        self.unit.get_or_init(|| {
            let mut unit = self.vectors.clone();
            for mut row in unit.rows_mut() {
                let norm = row.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.mapv_inplace(|x| (x as f64 / norm) as f32);
                }
            }
            unit
        })
    }

    /// Cosine similarity of two words, `None` if either is missing.
    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(self.vector(a)?.as_slice()?, self.vector(b)?.as_slice()?))
    }
}

/// Cosine similarity accumulated in double precision, clamped to [-1, 1].
/// Zero vectors have similarity 0 with everything.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Noise-word sampler over `count^0.75`.
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(NOISE_EXPONENT);
                acc
            })
            .collect();
        if acc == 0.0 {
            // No frequency information: uniform.
            cumulative = (1..=counts.len()).map(|i| i as f64).collect();
        }
        NoiseTable { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Initial vectors: uniform in `[-0.5/size, 0.5/size]`, blended with the
/// pretrained vector as `lockf * pretrained + (1 - lockf) * random` for words
/// the pretrained model knows.
fn initial_vectors<R: Rng>(
    vocab: &Vocabulary,
    hyper: &HyperParams,
    pretrained: Option<(&EmbeddingModel, f32)>,
    rng: &mut R,
) -> Array2<f32> {
    let size = hyper.size;
    let mut syn0 = Array2::<f32>::zeros((vocab.len(), size));
    for x in syn0.iter_mut() {
        *x = ((rng.random::<f64>() - 0.5) / size as f64) as f32;
    }
    if let Some((model, lockf)) = pretrained {
        for (i, word) in vocab.words().iter().enumerate() {
            if let Some(p) = model.vector(word) {
                for (x, &pv) in syn0.row_mut(i).iter_mut().zip(p.iter()) {
                    *x = lockf * pv + (1.0 - lockf) * *x;
                }
            }
        }
    }
    syn0
}

/// Train one model on `stream`.
///
/// `pretrained` must be given exactly when `hyper.lockf` is enabled and
/// `lexicon` exactly when `hyper.retro` is enabled. Pretrained vectors only
/// seed the initialization; the blended rows are then trained normally.
pub fn train(
    stream: &TokenStream,
    vocab: Arc<Vocabulary>,
    hyper: &HyperParams,
    corpus_id: &str,
    pretrained: Option<&EmbeddingModel>,
    lexicon: Option<&Lexicon>,
) -> Result<EmbeddingModel> {
    let started = Instant::now();
    hyper.validate()?;
    let seed_with = match (hyper.lockf(), pretrained) {
        (Some(lockf), Some(model)) => {
            if model.dim() != hyper.size {
                return Err(Error::config(format!(
                    "pretrained vectors have dimension {}, size is {}",
                    model.dim(),
                    hyper.size
                )));
            }
            Some((model, lockf as f32))
        }
        (None, None) => None,
        (Some(_), None) => return Err(Error::config("lockf is enabled but no pretrained vectors were given")),
        (None, Some(_)) => return Err(Error::config("pretrained vectors given but lockf is -1")),
    };
    let lexicon = match (hyper.retro(), lexicon) {
        (Some(r), Some(lex)) => Some((r, lex)),
        (None, None) => None,
        (Some(_), None) => return Err(Error::config("retro is enabled but no lexicon was given")),
        (None, Some(_)) => return Err(Error::config("lexicon given but retro is -1")),
    };
    if stream.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    debug_assert!(stream
        .sentences
        .iter()
        .flatten()
        .all(|&i| (i as usize) < vocab.len()));

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let syn0 = initial_vectors(&vocab, hyper, seed_with, &mut rng);
    let mut state = TrainState::new(syn0, &vocab, hyper);
    state.run(stream, hyper, &mut rng);

    let mut model = EmbeddingModel::new(
        model_id(corpus_id, hyper),
        corpus_id.to_string(),
        hyper.clone(),
        0.0,
        vocab,
        state.syn0,
    )?;
    if let Some((retro, lex)) = lexicon {
        model = retrofit(&model, lex, retro)?;
    }
    model.train_seconds = started.elapsed().as_secs_f64();
    Ok(model)
}

struct TrainState {
    syn0: Array2<f32>,
    /// Negative-sampling output rows, one per word.
    syn1neg: Option<(Array2<f32>, NoiseTable)>,
    /// Hierarchical-softmax rows, one per internal tree node.
    syn1: Option<(Array2<f32>, HuffmanTree)>,
}

impl TrainState {
    fn new(syn0: Array2<f32>, vocab: &Vocabulary, hyper: &HyperParams) -> Self {
        let (n, d) = syn0.dim();
        let syn1neg =
            (hyper.negative > 0).then(|| (Array2::zeros((n, d)), NoiseTable::new(vocab.counts())));
        let syn1 = hyper.hs.then(|| {
            let tree = HuffmanTree::new(vocab.counts());
            (Array2::zeros((tree.internal_nodes(), d)), tree)
        });
        TrainState { syn0, syn1neg, syn1 }
    }

    /// Update the output layers for predicting `word` from `input` and add
    /// the input-side step to `grad`.
    fn predict<R: Rng>(
        &mut self,
        input: &[f32],
        word: usize,
        negative: usize,
        lr: f32,
        grad: &mut [f32],
        targets: &mut Vec<(usize, bool)>,
        rng: &mut R,
    ) {
        if let Some((nodes, tree)) = &mut self.syn1 {
            sgd::hierarchical_step(input, word, tree, nodes, lr, grad);
        }
        if let Some((out, noise)) = &mut self.syn1neg {
            targets.clear();
            targets.push((word, true));
            for _ in 0..negative {
                let n = noise.sample(rng);
                if n != word {
                    targets.push((n, false));
                }
            }
            sgd::negative_sampling_step(input, targets, out, lr, grad);
        }
    }

    fn run<R: Rng>(&mut self, stream: &TokenStream, hyper: &HyperParams, rng: &mut R) {
        let dim = hyper.size;
        let total = (hyper.iterations * stream.token_count()).max(1) as f64;
        let mut processed = 0usize;
        let mut input = vec![0f32; dim];
        let mut grad = vec![0f32; dim];
        let mut targets = Vec::with_capacity(hyper.negative + 1);
        let mut context: Vec<usize> = Vec::with_capacity(2 * hyper.window);

        for _ in 0..hyper.iterations {
            for sentence in &stream.sentences {
                for pos in 0..sentence.len() {
                    let progress = processed as f64 / total;
                    let lr = (hyper.alpha * (1.0 - progress).max(MIN_ALPHA_FRACTION)) as f32;
                    processed += 1;

                    let center = sentence[pos] as usize;
                    let reduced = rng.random_range(0..hyper.window);
                    let span = hyper.window - reduced;
                    let lo = pos.saturating_sub(span);
                    let hi = (pos + span).min(sentence.len() - 1);
                    context.clear();
                    context.extend((lo..=hi).filter(|&c| c != pos).map(|c| sentence[c] as usize));
                    if context.is_empty() {
                        continue;
                    }

                    match hyper.architecture {
                        Architecture::SkipGram => {
                            for &ctx in &context {
                                input.copy_from_slice(self.syn0.row(ctx).as_slice().unwrap());
                                grad.fill(0.0);
                                self.predict(&input, center, hyper.negative, lr, &mut grad, &mut targets, rng);
                                for (x, g) in self.syn0.row_mut(ctx).iter_mut().zip(&grad) {
                                    *x += g;
                                }
                            }
                        }
                        Architecture::Cbow => {
                            input.fill(0.0);
                            for &ctx in &context {
                                for (h, &x) in input.iter_mut().zip(self.syn0.row(ctx).iter()) {
                                    *h += x;
                                }
                            }
                            let inv = 1.0 / context.len() as f32;
                            input.iter_mut().for_each(|h| *h *= inv);
                            grad.fill(0.0);
                            self.predict(&input, center, hyper.negative, lr, &mut grad, &mut targets, rng);
                            for &ctx in &context {
                                for (x, g) in self.syn0.row_mut(ctx).iter_mut().zip(&grad) {
                                    *x += g;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}
