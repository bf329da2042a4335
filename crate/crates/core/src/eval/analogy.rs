//! Word analogies answered by the vector offset `b - a + c` (3CosAdd).

use std::io::BufRead;

use ndarray::{s, Array2};

use super::Score;
use crate::error::{Error, Result};
use crate::trainer::EmbeddingModel;

pub const METRIC: &str = "analogy";

const BATCH: usize = 128;

/// `a` is to `b` as `c` is to `expected`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalogyQuestion {
    pub a: String,
    pub b: String,
    pub c: String,
    pub expected: String,
}

/// Read four-word lines, lowercased. Lines starting with `:` are section
/// headers and skipped.
pub fn read_analogies<R: BufRead>(input: R) -> Result<Vec<AnalogyQuestion>> {
    let mut out = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with(':') {
            continue;
        }
        let w: Vec<String> = line.split_whitespace().map(str::to_lowercase).collect();
        let [a, b, c, expected]: [String; 4] = w.try_into().map_err(|_| {
            Error::format(format!("analogy line {}: expected 4 words", lineno + 1))
        })?;
        out.push(AnalogyQuestion { a, b, c, expected });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AnalogyOptions {
    /// Only the first `n` (most frequent) words are candidates, and questions
    /// mentioning other words are skipped.
    pub restrict_vocab: Option<usize>,
}

pub fn analogy_accuracy(model: &EmbeddingModel, questions: &[AnalogyQuestion]) -> Result<Score> {
    analogy_accuracy_with(model, questions, &AnalogyOptions::default())
}

pub fn analogy_accuracy_with(
    model: &EmbeddingModel,
    questions: &[AnalogyQuestion],
    opts: &AnalogyOptions,
) -> Result<Score> {
    if questions.is_empty() {
        return Err(Error::unavailable(METRIC, "no questions"));
    }
    let limit = opts.restrict_vocab.unwrap_or(usize::MAX).min(model.len());
    let lookup = |w: &str| model.index_of(w).filter(|&i| i < limit);
    let answerable: Vec<[usize; 4]> = questions
        .iter()
        .filter_map(|q| Some([lookup(&q.a)?, lookup(&q.b)?, lookup(&q.c)?, lookup(&q.expected)?]))
        .collect();
    let skipped = questions.len() - answerable.len();
    if answerable.is_empty() {
        return Err(Error::unavailable(
            METRIC,
            format!("all {skipped} questions have out-of-vocabulary words"),
        ));
    }

    let unit = model.unit_vectors().slice(s![..limit, ..]);
    let words = model.vocab().words();
    let mut correct = 0usize;
    for chunk in answerable.chunks(BATCH) {
        let mut targets = Array2::<f32>::zeros((chunk.len(), model.dim()));
        for (mut t, q) in targets.rows_mut().into_iter().zip(chunk) {
            t.assign(&unit.row(q[1]));
            t -= &unit.row(q[0]);
            t += &unit.row(q[2]);
        }
        let scores = targets.dot(&unit.t());
        for (row, q) in scores.rows().into_iter().zip(chunk) {
            let mut best: Option<(usize, f32)> = None;
            for (i, &s) in row.iter().enumerate() {
                if i == q[0] || i == q[1] || i == q[2] {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bi, bs)) => s > bs || (s == bs && words[i] < words[bi]),
                };
                if better {
                    best = Some((i, s));
                }
            }
            if best.map(|b| b.0) == Some(q[3]) {
                correct += 1;
            }
        }
    }
    Ok(Score {
        value: correct as f64 / answerable.len() as f64,
        used: answerable.len(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: &str, b: &str, c: &str, e: &str) -> AnalogyQuestion {
        AnalogyQuestion {
            a: a.into(),
            b: b.into(),
            c: c.into(),
            expected: e.into(),
        }
    }

    fn royal() -> EmbeddingModel {
        // Unit vectors with man = king - queen + woman exactly.
        let r = std::f32::consts::FRAC_1_SQRT_2;
        EmbeddingModel::from_rows(
            "royal",
            &["king", "queen", "woman", "man", "banana"],
            &[
                vec![0.5, -0.5, r],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![-0.5, 0.5, r],
                vec![0.0, 0.0, -1.0],
            ],
        )
        .unwrap()
    }

    #[test]
    fn exact_offset() {
        // queen -> king as woman -> man: t = king - queen + woman.
        let s = analogy_accuracy(&royal(), &[q("queen", "king", "woman", "man")]).unwrap();
        assert_eq!(s.value, 1.0);
        let s = analogy_accuracy(&royal(), &[q("queen", "king", "woman", "banana")]).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn oov_questions_are_skipped() {
        let s = analogy_accuracy(
            &royal(),
            &[q("queen", "king", "woman", "man"), q("queen", "king", "girl", "boy")],
        )
        .unwrap();
        assert_eq!((s.used, s.skipped), (1, 1));
        assert!(analogy_accuracy(&royal(), &[q("x", "y", "z", "w")]).is_err());
        assert!(analogy_accuracy(&royal(), &[]).is_err());
    }

    #[test]
    fn restriction_limits_candidates() {
        let opts = AnalogyOptions { restrict_vocab: Some(3) };
        let s = analogy_accuracy_with(
            &royal(),
            &[q("queen", "king", "woman", "man"), q("king", "queen", "man", "woman")],
            &opts,
        );
        assert!(s.is_err());
    }

    #[test]
    fn parse_questions() {
        let text = ": capital-common-countries\nAthens Greece Baghdad Iraq\n\nbad line\n";
        assert!(read_analogies(text.as_bytes()).is_err());
        let qs = read_analogies(": x\nAthens Greece Baghdad Iraq\n".as_bytes()).unwrap();
        assert_eq!(qs, vec![q("athens", "greece", "baghdad", "iraq")]);
    }
}
