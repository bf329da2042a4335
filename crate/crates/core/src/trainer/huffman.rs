use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ndarray::Array2;

/// Binary Huffman coding of the vocabulary, built from word counts.
///
/// Internal nodes are numbered `0..n-1`, the root being `n - 2`. For word
/// `w`, `points(w)` lists the internal nodes on the path from the root and
/// `codes(w)` the branch taken at each of them.
#[derive(Clone, Debug)]
pub struct HuffmanTree {
    codes: Vec<Vec<u8>>,
    points: Vec<Vec<u32>>,
}

impl HuffmanTree {
    pub fn new(counts: &[u64]) -> Self {
        let n = counts.len();
        if n <= 1 {
            return HuffmanTree {
                codes: vec![Vec::new(); n],
                points: vec![Vec::new(); n],
            };
        }
        // Nodes 0..n are leaves, n.. are internal. Ties pop the lower id.
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
            counts.iter().enumerate().map(|(i, &c)| Reverse((c, i))).collect();
        let mut parent = vec![0usize; 2 * n - 1];
        let mut branch = vec![0u8; 2 * n - 1];
        let mut next = n;
        while heap.len() > 1 {
            let Reverse((c1, a)) = heap.pop().unwrap();
            let Reverse((c2, b)) = heap.pop().unwrap();
            parent[a] = next;
            parent[b] = next;
            branch[b] = 1;
            heap.push(Reverse((c1 + c2, next)));
            next += 1;
        }
        let root = 2 * n - 2;
        let mut codes = Vec::with_capacity(n);
        let mut points = Vec::with_capacity(n);
        for leaf in 0..n {
            let mut code = Vec::new();
            let mut point = Vec::new();
            let mut node = leaf;
            while node != root {
                code.push(branch[node]);
                node = parent[node];
                point.push((node - n) as u32);
            }
            code.reverse();
            point.reverse();
            codes.push(code);
            points.push(point);
        }
        HuffmanTree { codes, points }
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn internal_nodes(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn codes(&self, word: usize) -> &[u8] {
        &self.codes[word]
    }

    pub fn points(&self, word: usize) -> &[u32] {
        &self.points[word]
    }

    /// Probability of `word` under the tree for a hidden vector, given one
    /// output row per internal node. Branch 0 is taken with probability
    /// `sigmoid(h . w_node)`.
    pub fn path_probability(&self, word: usize, hidden: &[f32], node_weights: &Array2<f32>) -> f64 {
        self.codes[word]
            .iter()
            .zip(&self.points[word])
            .map(|(&code, &node)| {
                let x: f64 = node_weights
                    .row(node as usize)
                    .iter()
                    .zip(hidden)
                    .map(|(&a, &b)| a as f64 * b as f64)
                    .sum();
                let p0 = 1.0 / (1.0 + (-x).exp());
                if code == 0 {
                    p0
                } else {
                    1.0 - p0
                }
            })
            .product()
    }
}
