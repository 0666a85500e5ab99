//! Exact t-SNE.
//!
//! Input affinities come from per-point Gaussian kernels whose bandwidths are
//! bisected to a target perplexity, then symmetrized. The map is optimized by
//! gradient descent on `KL(P || Q)` with Student-t output affinities, momentum,
//! per-coordinate adaptive gains and an early-exaggeration phase. All
//! reductions run in a fixed order, so a seed fully determines the result.
//!
//! Cost is O(N^2) per iteration in time and memory; intended for a few
//! thousand points at most.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::rng::SplitMix64;

/// Entropy tolerance (nats) of the bandwidth search.
const ENTROPY_TOL: f64 = 1e-5;
const BISECTION_STEPS: usize = 50;
/// Floor applied to conditional affinities before renormalizing, so that
/// duplicate or isolated points never produce all-zero rows.
const AFFINITY_FLOOR: f64 = 1e-12;
const INIT_STD: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub out_dims: usize,
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    /// Iterations run with exaggerated affinities and the initial momentum.
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            out_dims: 2,
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
        }
    }
}

impl TsneConfig {
    /// Size-scaled step `max(N / (4 * early_exaggeration), 50)`. The fixed
    /// default of 200 overshoots on small inputs (a few hundred points or
    /// fewer), where the affinities and therefore the gradients are larger.
    pub fn auto_learning_rate(&self, n: usize) -> f64 {
        (n as f64 / (4.0 * self.early_exaggeration)).max(50.0)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.out_dims == 2 || self.out_dims == 3) {
            return Err(Error::InvalidParameter(format!(
                "t-SNE output dimension must be 2 or 3, got {}",
                self.out_dims
            )));
        }
        if !(self.perplexity > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "perplexity {} must exceed 1",
                self.perplexity
            )));
        }
        if !(3.0 * self.perplexity < (n as f64 - 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "perplexity {} too large for {n} points (needs < (N-1)/3)",
                self.perplexity
            )));
        }
        if !(self.learning_rate > 0.0 && self.early_exaggeration >= 1.0) {
            return Err(Error::InvalidParameter(
                "learning rate must be positive and exaggeration >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    /// `N x d` coordinates.
    pub coords: Matrix,
    /// `KL(P || Q)` at the final iterate; `None` for linear reductions.
    pub final_kl: Option<f64>,
    /// KL of the un-exaggerated objective at the start of each iteration.
    pub kl_trace: Vec<f64>,
}

impl Embedding {
    pub fn from_coords(coords: Matrix) -> Self {
        Self {
            coords,
            final_kl: None,
            kl_trace: Vec::new(),
        }
    }
}

/// Conditional affinities `p_{j|i}` of one point, given squared distances to
/// every point (`dist[i]` ignored). Returns the row and its precision
/// `beta = 1 / (2 sigma^2)`.
pub fn conditional_row(dist: &[f64], i: usize, perplexity: f64) -> (Vec<f64>, f64) {
    let n = dist.len();
    let target = libm::log(perplexity);
    let dmin = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .fold(f64::INFINITY, |m, (_, &d)| m.min(d));

    let mut row = vec![0.0; n];
    let mut beta = 1.0;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for _ in 0..BISECTION_STEPS {
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for j in 0..n {
            if j == i {
                row[j] = 0.0;
                continue;
            }
            let shifted = dist[j] - dmin;
            let p = libm::exp(-beta * shifted);
            row[j] = p;
            sum += p;
            weighted += shifted * p;
        }
        let entropy = libm::log(sum) + beta * weighted / sum;
        let diff = entropy - target;
        if diff.abs() < ENTROPY_TOL {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_infinite() {
                beta * 2.0
            } else {
                0.5 * (beta + hi)
            };
        } else {
            hi = beta;
            beta = if lo.is_infinite() {
                beta / 2.0
            } else {
                0.5 * (beta + lo)
            };
        }
    }

    let sum: f64 = row.iter().sum();
    for (j, p) in row.iter_mut().enumerate() {
        if j != i {
            *p = (*p / sum).max(AFFINITY_FLOOR);
        }
    }
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= sum);
    (row, beta)
}

/// Perplexity (`exp` of the Shannon entropy in nats) of a probability row.
pub fn row_perplexity(row: &[f64]) -> f64 {
    let h: f64 = row.iter().filter(|&&p| p > 0.0).map(|&p| -p * libm::log(p)).sum();
    libm::exp(h)
}

/// Symmetric joint affinities `p_ij = (p_{j|i} + p_{i|j}) / 2N`.
pub fn p_matrix(x: &Matrix, perplexity: f64) -> Result<Matrix> {
    let n = x.rows();
    if n < 4 {
        return Err(Error::InvalidParameter(format!(
            "t-SNE needs at least 4 points, got {n}"
        )));
    }
    if !(perplexity > 1.0 && perplexity < (n - 1) as f64) {
        return Err(Error::InvalidParameter(format!(
            "perplexity {perplexity} outside (1, {})",
            n - 1
        )));
    }
    x.ensure_finite("t-SNE input")?;

    let mut cond = Matrix::zeros(n, n);
    let mut dist = vec![0.0; n];
    for i in 0..n {
        for (j, d) in dist.iter_mut().enumerate() {
            *d = sq_dist(x.row(i), x.row(j));
        }
        let (row, _) = conditional_row(&dist, i, perplexity);
        cond.row_mut(i).copy_from_slice(&row);
    }

    let mut p = Matrix::zeros(n, n);
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = (cond[(i, j)] + cond[(j, i)]) / denom;
        }
    }
    let total: f64 = p.as_slice().iter().sum();
    for i in 0..n {
        p.row_mut(i).iter_mut().for_each(|v| *v /= total);
    }
    Ok(p)
}

/// Student-t kernel values `(1 + |y_i - y_j|^2)^-1` (zero diagonal) and their sum.
fn kernel(y: &Matrix) -> (Matrix, f64) {
    let n = y.rows();
    let mut num = Matrix::zeros(n, n);
    let mut z = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 1.0 / (1.0 + sq_dist(y.row(i), y.row(j)));
            num[(i, j)] = v;
            num[(j, i)] = v;
            z += 2.0 * v;
        }
    }
    (num, z)
}

/// Output affinities `q_ij`, normalized over all ordered pairs.
pub fn q_matrix(y: &Matrix) -> Matrix {
    let (mut num, z) = kernel(y);
    for i in 0..num.rows() {
        num.row_mut(i).iter_mut().for_each(|v| *v /= z);
    }
    num
}

/// `sum_ij p_ij ln(p_ij / q_ij)`, skipping zero `p_ij`.
pub fn kl_divergence(p: &Matrix, y: &Matrix) -> f64 {
    let q = q_matrix(y);
    let mut kl = 0.0;
    for (&pij, &qij) in p.as_slice().iter().zip(q.as_slice()) {
        if pij > 0.0 {
            kl += pij * libm::log(pij / qij);
        }
    }
    kl
}

/// `dKL/dy_i = 4 sum_j (p_ij - q_ij) (y_i - y_j) / (1 + |y_i - y_j|^2)`.
pub fn kl_gradient(p: &Matrix, y: &Matrix) -> Matrix {
    let (num, z) = kernel(y);
    gradient_from_kernel(p, y, &num, z, 1.0)
}

fn gradient_from_kernel(p: &Matrix, y: &Matrix, num: &Matrix, z: f64, exaggeration: f64) -> Matrix {
    let (n, d) = (y.rows(), y.cols());
    let mut grad = Matrix::zeros(n, d);
    for i in 0..n {
        let yi = y.row(i);
        let gi = grad.row_mut(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = num[(i, j)];
            let coeff = 4.0 * (exaggeration * p[(i, j)] - w / z) * w;
            for ((g, a), b) in gi.iter_mut().zip(yi).zip(y.row(j)) {
                *g += coeff * (a - b);
            }
        }
    }
    grad
}

/// Embeds the rows of `x` into `cfg.out_dims` dimensions.
pub fn tsne_embed(x: &Matrix, cfg: &TsneConfig) -> Result<Embedding> {
    let n = x.rows();
    cfg.validate(n)?;
    let p = p_matrix(x, cfg.perplexity)?;
    optimize(&p, cfg)
}

/// Gradient descent on a precomputed joint affinity matrix.
pub fn optimize(p: &Matrix, cfg: &TsneConfig) -> Result<Embedding> {
    let n = p.rows();
    let d = cfg.out_dims;
    let mut rng = SplitMix64::new(cfg.seed);
    let init = (0..n * d).map(|_| INIT_STD * rng.normal()).collect();
    let mut y = Matrix::from_vec(n, d, init)?;
    let mut update = Matrix::zeros(n, d);
    let mut gains = Matrix::from_vec(n, d, vec![1.0; n * d])?;

    let p_entropy: f64 = p
        .as_slice()
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * libm::log(v))
        .sum();
    let mut kl_trace = Vec::with_capacity(cfg.iterations);

    for iter in 0..cfg.iterations {
        let exaggerating = iter < cfg.exaggeration_iters;
        let exaggeration = if exaggerating { cfg.early_exaggeration } else { 1.0 };
        let momentum = if exaggerating {
            cfg.initial_momentum
        } else {
            cfg.final_momentum
        };
        if iter == cfg.exaggeration_iters {
            // The second phase starts a fresh descent: velocity and gains
            // built up against the exaggerated objective would otherwise
            // carry the iterate uphill on the true one.
            update = Matrix::zeros(n, d);
            gains = Matrix::from_vec(n, d, vec![1.0; n * d])?;
        }

        let (num, z) = kernel(&y);
        let mut cross = 0.0;
        for (&pij, &w) in p.as_slice().iter().zip(num.as_slice()) {
            if pij > 0.0 {
                cross += pij * libm::log(w);
            }
        }
        let kl = p_entropy - cross + libm::log(z);
        if !kl.is_finite() {
            return Err(Error::Diverged { iteration: iter });
        }
        kl_trace.push(kl);

        let grad = gradient_from_kernel(p, &y, &num, z, exaggeration);
        let g = grad.as_slice();
        let mut step_ok = true;
        for idx in 0..n * d {
            let (i, c) = (idx / d, idx % d);
            let gain = &mut gains[(i, c)];
            let u = update[(i, c)];
            *gain = if (g[idx] > 0.0) != (u > 0.0) {
                *gain + 0.2
            } else {
                (*gain * 0.8).max(MIN_GAIN)
            };
            let new_u = momentum * u - cfg.learning_rate * *gain * g[idx];
            update[(i, c)] = new_u;
            y[(i, c)] += new_u;
            step_ok &= y[(i, c)].is_finite();
        }
        if !step_ok {
            return Err(Error::Diverged { iteration: iter });
        }
        let mean = y.column_means();
        for i in 0..n {
            for (v, m) in y.row_mut(i).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
    }

    let final_kl = kl_divergence(p, &y);
    if !final_kl.is_finite() {
        return Err(Error::Diverged {
            iteration: cfg.iterations,
        });
    }
    Ok(Embedding {
        coords: y,
        final_kl: Some(final_kl.max(0.0)),
        kl_trace,
    })
}
