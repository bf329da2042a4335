//! Output-layer updates shared by skip-gram and CBOW.
//!
//! Both updates read the input vector, move the output rows, and accumulate
//! the input-side step into `grad_input`. With `lr = 1` the accumulated
//! value is exactly the negative gradient of the corresponding loss with
//! respect to the input vector.

use ndarray::Array2;

use super::huffman::HuffmanTree;

#[inline]
pub(crate) fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f32, x: &[f32], y: &mut [f32]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// One negative-sampling step. `targets[0]` is the observed word (label 1),
/// the rest are noise words (label 0).
///
/// The loss being descended is
/// `-log sigmoid(u_o . v) - sum_n log sigmoid(-u_n . v)`.
pub fn negative_sampling_step(
    input: &[f32],
    targets: &[(usize, bool)],
    output: &mut Array2<f32>,
    lr: f32,
    grad_input: &mut [f32],
) {
    let out = output.as_slice_mut().expect("output rows are contiguous");
    let dim = input.len();
    for &(target, positive) in targets {
        let row = &mut out[target * dim..(target + 1) * dim];
        let label = if positive { 1.0 } else { 0.0 };
        let g = (label - sigmoid(dot(input, row))) * lr;
        axpy(g, row, grad_input);
        axpy(g, input, row);
    }
}

/// Loss of one negative-sampling step, in double precision.
pub fn negative_sampling_loss(input: &[f32], targets: &[(usize, bool)], output: &Array2<f32>) -> f64 {
    targets
        .iter()
        .map(|&(target, positive)| {
            let x: f64 = output
                .row(target)
                .iter()
                .zip(input)
                .map(|(&a, &b)| a as f64 * b as f64)
                .sum();
            let s = if positive { x } else { -x };
            // -log sigmoid(s)
            (1.0 + (-s).exp()).ln()
        })
        .sum()
}

/// One hierarchical-softmax step along the Huffman path of `word`.
pub fn hierarchical_step(
    input: &[f32],
    word: usize,
    tree: &HuffmanTree,
    nodes: &mut Array2<f32>,
    lr: f32,
    grad_input: &mut [f32],
) {
    let out = nodes.as_slice_mut().expect("node rows are contiguous");
    let dim = input.len();
    for (&code, &node) in tree.codes(word).iter().zip(tree.points(word)) {
        let node = node as usize;
        let row = &mut out[node * dim..(node + 1) * dim];
        let g = (1.0 - code as f32 - sigmoid(dot(input, row))) * lr;
        axpy(g, row, grad_input);
        axpy(g, input, row);
    }
}
