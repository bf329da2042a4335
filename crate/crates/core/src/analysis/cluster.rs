//! Agglomerative clustering (average linkage, Euclidean distance) used to
//! order heatmap rows and columns.

use serde::{Deserialize, Serialize};

/// One merge step. Cluster ids follow the usual convention: `0..n` are the
/// input rows and merge `i` creates cluster `n + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// The merged cluster containing the smaller leaf index.
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
    /// Leaves left to right as drawn.
    pub leaf_order: Vec<usize>,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Cluster `rows`. Among equally distant candidate pairs, the one whose
/// smallest leaf indices are lexicographically smallest merges first.
/// Zero rows give an empty tree, one row a single leaf.
pub fn hierarchical_cluster(rows: &[Vec<f64>]) -> Dendrogram {
    let n = rows.len();
    let mut dendrogram = Dendrogram {
        n_leaves: n,
        merges: Vec::with_capacity(n.saturating_sub(1)),
        leaf_order: Vec::new(),
    };
    if n <= 1 {
        dendrogram.leaf_order = (0..n).collect();
        return dendrogram;
    }

    // Slot `i` holds an active cluster (id, size, smallest leaf) or None.
    let mut slots: Vec<Option<(usize, usize, usize)>> = (0..n).map(|i| Some((i, 1, i))).collect();
    let mut dist = vec![vec![0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&rows[i], &rows[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    for step in 0..(n - 1) {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in 0..n {
            let Some((_, _, li)) = slots[i] else { continue };
            for j in (i + 1)..n {
                let Some((_, _, lj)) = slots[j] else { continue };
                let key = (li.min(lj), li.max(lj));
                let d = dist[i][j];
                let better = match best {
                    None => true,
                    Some((bd, bkey, _, _)) => d < bd || (d == bd && key < bkey),
                };
                if better {
                    best = Some((d, key, i, j));
                }
            }
        }
        let (d, _, i, j) = best.expect("at least two active clusters");
        let (id_i, size_i, leaf_i) = slots[i].unwrap();
        let (id_j, size_j, leaf_j) = slots[j].unwrap();
        let (left, right) = if leaf_i < leaf_j { (id_i, id_j) } else { (id_j, id_i) };
        let size = size_i + size_j;
        dendrogram.merges.push(Merge {
            left,
            right,
            distance: d,
            size,
        });
        // Average linkage update, merged cluster kept in slot i.
        for k in 0..n {
            if k == i || k == j || slots[k].is_none() {
                continue;
            }
            let merged = (size_i as f64 * dist[i][k] + size_j as f64 * dist[j][k]) / size as f64;
            dist[i][k] = merged;
            dist[k][i] = merged;
        }
        slots[i] = Some((n + step, size, leaf_i.min(leaf_j)));
        slots[j] = None;
    }

    dendrogram.leaf_order = leaf_order(n, &dendrogram.merges);
    dendrogram
}

fn leaf_order(n: usize, merges: &[Merge]) -> Vec<usize> {
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![n + merges.len() - 1];
    while let Some(node) = stack.pop() {
        if node < n {
            order.push(node);
        } else {
            let m = &merges[node - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_distance_pair_merges_first() {
        let d = hierarchical_cluster(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![10.0, 10.0]]);
        assert_eq!(d.merges[0], Merge { left: 0, right: 1, distance: 0.0, size: 2 });
        assert_eq!(d.merges[1].left, 3);
        assert_eq!(d.merges[1].right, 2);
        assert_eq!(d.leaf_order, vec![0, 1, 2]);
    }

    #[test]
    fn average_linkage_height() {
        // 0 and 1 merge at 1; 2 is at distance 4 and 5 from them.
        let d = hierarchical_cluster(&[vec![0.0], vec![1.0], vec![5.0]]);
        assert_eq!(d.merges[0].distance, 1.0);
        assert_eq!(d.merges[1].distance, 4.5);
    }

    #[test]
    fn degenerate_inputs() {
        let one = hierarchical_cluster(&[vec![1.0, 2.0]]);
        assert!(one.merges.is_empty());
        assert_eq!(one.leaf_order, vec![0]);
        assert_eq!(hierarchical_cluster(&[]).leaf_order, Vec::<usize>::new());
    }

    #[test]
    fn ties_prefer_smaller_leaves() {
        let d = hierarchical_cluster(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!((d.merges[0].left, d.merges[0].right), (0, 1));
        assert_eq!((d.merges[1].left, d.merges[1].right), (2, 3));
        assert_eq!(d.leaf_order, vec![0, 1, 2, 3]);
    }
}
