//! Pairwise Pearson correlations between hyperparameters and metrics, with
//! the raw points for scatter plots.

use serde::{Deserialize, Serialize};

use super::{dimensions, ModelSummary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub x: String,
    pub y: String,
    /// `None` when fewer than two models have both values or either side
    /// has zero variance.
    pub r: Option<f64>,
    pub model_ids: Vec<String>,
    pub points: Vec<[f64; 2]>,
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// One entry per unordered dimension pair, diagonal included, in
/// [`dimensions`] order. Categories use their declared ordinal.
pub fn pairwise_correlations(population: &[ModelSummary]) -> Vec<Correlation> {
    let dims = dimensions(population);
    let values: Vec<Vec<Option<f64>>> = dims
        .iter()
        .map(|d| population.iter().map(|m| m.dimension(d).map(|v| v.as_f64())).collect())
        .collect();
    let mut out = Vec::new();
    for i in 0..dims.len() {
        for j in i..dims.len() {
            let mut ids = Vec::new();
            let mut points = Vec::new();
            for (k, m) in population.iter().enumerate() {
                if let (Some(x), Some(y)) = (values[i][k], values[j][k]) {
                    ids.push(m.model_id.clone());
                    points.push([x, y]);
                }
            }
            let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
            let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
            out.push(Correlation {
                x: dims[i].clone(),
                y: dims[j].clone(),
                r: pearson(&xs, &ys),
                model_ids: ids,
                points,
            });
        }
    }
    out
}
