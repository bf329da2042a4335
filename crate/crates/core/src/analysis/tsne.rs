//! Exact t-SNE for the small, query-anchored word sets shown in the
//! embedding explorer.
//!
//! The optimizer can be stepped so callers can publish a layout after the
//! pre-warm iterations and keep refining it in the background.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Iterations run before a layout is first shown.
pub const PREWARM_ITERS: usize = 150;

#[derive(Clone, Debug, PartialEq)]
pub struct TsneOptions {
    /// Defaults to `min(30, (n - 1) / 3)`.
    pub perplexity: Option<f64>,
    pub seed: u64,
    pub prewarm_iters: usize,
    pub total_iters: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
}

impl Default for TsneOptions {
    fn default() -> Self {
        TsneOptions {
            perplexity: None,
            seed: 0,
            prewarm_iters: PREWARM_ITERS,
            total_iters: 1000,
            learning_rate: 200.0,
            early_exaggeration: 4.0,
            exaggeration_iters: 100,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
        }
    }
}

fn squared_distances(points: &[Vec<f64>]) -> Array2<f64> {
    let n = points.len();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[[i, j]] = s;
            d[[j, i]] = s;
        }
    }
    d
}

/// Row `i` of the conditional affinities for precision `beta`, and its
/// entropy in nats.
fn conditional_row(dist: &Array2<f64>, i: usize, beta: f64, row: &mut [f64]) -> f64 {
    let n = row.len();
    let dmin = (0..n)
        .filter(|&j| j != i)
        .map(|j| dist[[i, j]])
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for j in 0..n {
        row[j] = if j == i { 0.0 } else { (-beta * (dist[[i, j]] - dmin)).exp() };
        sum += row[j];
    }
    let mut weighted = 0.0;
    for j in 0..n {
        row[j] /= sum;
        weighted += row[j] * (dist[[i, j]] - dmin);
    }
    // H = log(sum) + beta * E[d - dmin], with the shift cancelling.
    sum.ln() + beta * weighted
}

/// Symmetrized input affinities `P = (P_{j|i} + P_{i|j}) / 2n` with each
/// Gaussian bandwidth found by bisection so that the row perplexity matches
/// `perplexity`.
pub fn input_affinities(points: &[Vec<f64>], perplexity: f64) -> Result<Array2<f64>> {
    let n = points.len();
    if n < 2 {
        return Err(Error::config("need at least two points"));
    }
    if !(perplexity > 0.0 && perplexity <= (n - 1) as f64) {
        return Err(Error::config(format!(
            "perplexity {perplexity} is infeasible for {n} points"
        )));
    }
    let dist = squared_distances(points);
    let target = perplexity.ln();
    let mut cond = Array2::<f64>::zeros((n, n));
    let mut row = vec![0f64; n];
    for i in 0..n {
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut beta = 1.0;
        for _ in 0..200 {
            let h = conditional_row(&dist, i, beta, &mut row);
            let diff = h - target;
            if diff.abs() < 1e-12 {
                break;
            }
            if diff > 0.0 {
                // Too flat: sharpen.
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        conditional_row(&dist, i, beta, &mut row);
        cond.row_mut(i).iter_mut().zip(&row).for_each(|(c, &r)| *c = r);
    }
    let joint = (&cond + &cond.t()) / (2.0 * n as f64);
    Ok(joint)
}

/// Kullback-Leibler divergence of the output affinities from `p`.
pub fn kl_divergence(p: &Array2<f64>, layout: &[[f64; 2]]) -> f64 {
    let n = layout.len();
    let mut num = Array2::<f64>::zeros((n, n));
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dx = layout[i][0] - layout[j][0];
                let dy = layout[i][1] - layout[j][1];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[[i, j]] = v;
                total += v;
            }
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[[i, j]];
            if i != j && pij > 0.0 {
                let q = (num[[i, j]] / total).max(1e-300);
                kl += pij * (pij / q).ln();
            }
        }
    }
    kl
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// A t-SNE optimization in progress.
#[derive(Clone, Debug)]
pub struct Tsne {
    p: Array2<f64>,
    y: Vec<[f64; 2]>,
    velocity: Vec<[f64; 2]>,
    gains: Vec<[f64; 2]>,
    iteration: usize,
    opts: TsneOptions,
}

impl Tsne {
    /// Set up the optimization. `init[i] = Some(xy)` pins the starting
    /// position of point `i`; other points start near the origin.
    pub fn new(points: &[Vec<f64>], opts: TsneOptions, init: Option<&[Option<[f64; 2]>]>) -> Result<Self> {
        let n = points.len();
        if n < 3 {
            return Err(Error::config(format!("t-SNE needs at least 3 points, got {n}")));
        }
        let max_perplexity = (n - 1) as f64 / 3.0;
        let perplexity = opts.perplexity.unwrap_or_else(|| max_perplexity.min(30.0));
        if !(perplexity > 0.0) || perplexity > max_perplexity {
            return Err(Error::config(format!(
                "perplexity {perplexity} must be in (0, {max_perplexity}] for {n} points"
            )));
        }
        let p = input_affinities(points, perplexity)?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut y: Vec<[f64; 2]> = (0..n)
            .map(|_| [gaussian(&mut rng) * 1e-4, gaussian(&mut rng) * 1e-4])
            .collect();
        if let Some(init) = init {
            for (yi, prior) in y.iter_mut().zip(init) {
                if let Some(xy) = prior {
                    *yi = *xy;
                }
            }
        }
        Ok(Tsne {
            p,
            y,
            velocity: vec![[0.0; 2]; n],
            gains: vec![[1.0; 2]; n],
            iteration: 0,
            opts,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.opts.total_iters
    }

    pub fn layout(&self) -> &[[f64; 2]] {
        &self.y
    }

    pub fn affinities(&self) -> &Array2<f64> {
        &self.p
    }

    pub fn kl_divergence(&self) -> f64 {
        kl_divergence(&self.p, &self.y)
    }

    /// One gradient step with momentum and per-coordinate gains.
    pub fn step(&mut self) {
        let n = self.y.len();
        let exaggeration = if self.iteration < self.opts.exaggeration_iters {
            self.opts.early_exaggeration
        } else {
            1.0
        };
        let momentum = if self.iteration < self.opts.momentum_switch_iter {
            self.opts.initial_momentum
        } else {
            self.opts.final_momentum
        };

        let mut num = Array2::<f64>::zeros((n, n));
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = self.y[i][0] - self.y[j][0];
                let dy = self.y[i][1] - self.y[j][1];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[[i, j]] = v;
                num[[j, i]] = v;
                total += 2.0 * v;
            }
        }
        for i in 0..n {
            let mut grad = [0.0f64; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let coeff = (exaggeration * self.p[[i, j]] - num[[i, j]] / total) * num[[i, j]];
                grad[0] += 4.0 * coeff * (self.y[i][0] - self.y[j][0]);
                grad[1] += 4.0 * coeff * (self.y[i][1] - self.y[j][1]);
            }
            for d in 0..2 {
                let same_sign = (grad[d] > 0.0) == (self.velocity[i][d] > 0.0);
                let g = if same_sign { self.gains[i][d] * 0.8 } else { self.gains[i][d] + 0.2 };
                self.gains[i][d] = g.max(0.01);
                self.velocity[i][d] = momentum * self.velocity[i][d] - self.opts.learning_rate * self.gains[i][d] * grad[d];
            }
        }
        let mut mean = [0.0f64; 2];
        for (yi, vi) in self.y.iter_mut().zip(&self.velocity) {
            yi[0] += vi[0];
            yi[1] += vi[1];
            mean[0] += yi[0];
            mean[1] += yi[1];
        }
        for yi in &mut self.y {
            yi[0] -= mean[0] / n as f64;
            yi[1] -= mean[1] / n as f64;
        }
        self.iteration += 1;
    }

    /// Step until `iteration` is reached (or the run is complete).
    pub fn run_until(&mut self, iteration: usize) {
        let stop = iteration.min(self.opts.total_iters);
        while self.iteration < stop {
            self.step();
        }
    }

    pub fn run_to_end(&mut self) {
        self.run_until(self.opts.total_iters);
    }

    pub fn prewarm(&mut self) {
        self.run_until(self.opts.prewarm_iters);
    }
}

/// A 2-D layout of a word set under one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub model_id: String,
    pub points: Vec<ProjectedWord>,
    pub focus: Vec<String>,
    /// Labeled words added beyond the nearest neighbors.
    pub injected: Vec<String>,
    pub iteration: usize,
    pub done: bool,
    pub kl_divergence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedWord {
    pub word: String,
    pub x: f64,
    pub y: f64,
}

impl Projection {
    pub fn position(&self, word: &str) -> Option<[f64; 2]> {
        self.points.iter().find(|p| p.word == word).map(|p| [p.x, p.y])
    }
}
