//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use lexiscope_core::sweep::SweepConfig;
use lexiscope_core::trainer::EmbeddingModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const POSITIVE: [&str; 5] = ["good", "great", "nice", "fine", "happy"];
pub const NEGATIVE: [&str; 5] = ["bad", "awful", "poor", "nasty", "sad"];

/// Two-topic text: each line draws its words from one block only.
pub fn two_topic_corpus(lines: usize, words_per_line: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for i in 0..lines {
        let block = if i % 2 == 0 { &POSITIVE } else { &NEGATIVE };
        let line: Vec<&str> = (0..words_per_line).map(|_| block[rng.random_range(0..block.len())]).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Write a small corpus with triples, documents and analogies into `dir`
/// and return a sweep config over it.
pub fn toy_sweep(dir: &Path, params: &str) -> SweepConfig {
    fs::write(dir.join("toy.txt"), two_topic_corpus(120, 9, 3)).unwrap();
    fs::write(
        dir.join("triples.tsv"),
        "good\tgreat\tbad\ttrain\nbad\tawful\tgood\ttrain\nnice\tfine\tpoor\ttest\n",
    )
    .unwrap();
    let mut docs = String::new();
    for i in 0..20 {
        docs.push_str(&format!("pos\t{} {} film\n", POSITIVE[i % 5], POSITIVE[(i + 1) % 5]));
        docs.push_str(&format!("neg\t{} {} film\n", NEGATIVE[i % 5], NEGATIVE[(i + 2) % 5]));
    }
    fs::write(dir.join("docs.tsv"), docs).unwrap();
    fs::write(dir.join("questions.txt"), ": toy\ngood great bad awful\nnice fine poor nasty\n").unwrap();
    let size = if params.contains("\"size\"") { "" } else { "\"size\": 12, " };
    let json = format!(
        r#"{{
  "corpus": "toy.txt",
  "min_count": 1,
  "params": {params},
  "fixed": {{{size}"iterations": 3, "subsample_t": -1}},
  "resources": {{"triples": "triples.tsv", "documents": "docs.tsv", "analogies": "questions.txt"}}
}}"#
    );
    let path = dir.join("sweep.json");
    fs::write(&path, json).unwrap();
    SweepConfig::load(&path).unwrap()
}

/// Random vectors for `n` words named `w0..`.
pub fn random_model(id: &str, n: usize, dim: usize, seed: u64) -> EmbeddingModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    let rows: Vec<Vec<f32>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
        .collect();
    EmbeddingModel::from_rows(id, &words, &rows).unwrap()
}

/// Direct cosine in f64.
pub fn cos64(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn row64(model: &EmbeddingModel, word: &str) -> Vec<f64> {
    model.vector(word).unwrap().iter().map(|&x| x as f64).collect()
}

/// One merge found by brute force: the two leaf sets and their average
/// pairwise distance.
#[derive(Debug)]
pub struct BruteMerge {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub distance: f64,
}

/// Agglomerative clustering by enumerating every pair of current clusters
/// and averaging all leaf-to-leaf distances directly.
pub fn brute_force_agglomerate(rows: &[Vec<f64>]) -> Vec<BruteMerge> {
    let dist = |a: usize, b: usize| -> f64 {
        rows[a].iter().zip(&rows[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let mut clusters: Vec<Vec<usize>> = (0..rows.len()).map(|i| vec![i]).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let mut total = 0.0;
                for &a in &clusters[i] {
                    for &b in &clusters[j] {
                        total += dist(a, b);
                    }
                }
                let d = total / (clusters[i].len() * clusters[j].len()) as f64;
                let (mi, mj) = (clusters[i][0], clusters[j][0]);
                let key = (mi.min(mj), mi.max(mj));
                if best.is_none_or(|(bd, bk, _, _)| d < bd || (d == bd && key < bk)) {
                    best = Some((d, key, i, j));
                }
            }
        }
        let (d, _, i, j) = best.unwrap();
        let (a, b) = (clusters[i].clone(), clusters[j].clone());
        let (left, right) = if a[0] < b[0] { (a, b) } else { (b, a) };
        let mut merged: Vec<usize> = left.iter().chain(&right).copied().collect();
        merged.sort();
        merges.push(BruteMerge { left, right, distance: d });
        clusters.remove(j);
        clusters[i] = merged;
    }
    merges
}

/// Leaf sets of every cluster id in a dendrogram.
pub fn leaf_sets(d: &lexiscope_core::analysis::Dendrogram) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = (0..d.n_leaves).map(|i| vec![i]).collect();
    for m in &d.merges {
        let mut s: Vec<usize> = sets[m.left].iter().chain(&sets[m.right]).copied().collect();
        s.sort();
        sets.push(s);
    }
    sets
}

/// Whether the merge sequence of `d` equals the brute-force one.
pub fn same_merges(d: &lexiscope_core::analysis::Dendrogram, brute: &[BruteMerge], tol: f64) -> bool {
    let sets = leaf_sets(d);
    d.merges.len() == brute.len()
        && d.merges.iter().zip(brute).all(|(m, b)| {
            sets[m.left] == b.left && sets[m.right] == b.right && (m.distance - b.distance).abs() <= tol
        })
}
