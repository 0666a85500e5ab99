//! K-Means clustering.
//!
//! Lloyd iterations from k-means++ (or uniformly random) seeds, with several
//! restarts keeping the lowest inertia. A cluster that empties during an
//! iteration takes over the point farthest from its own centroid, which
//! never increases the objective.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::rng::{derive_seed, SplitMix64};

/// Cluster count used for the fault catalogue.
pub const DEFAULT_K: usize = 15;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    #[default]
    #[serde(rename = "kmeans++")]
    KMeansPlusPlus,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansParams {
    pub k: usize,
    pub init: Init,
    pub n_init: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            init: Init::KMeansPlusPlus,
            n_init: 10,
            max_iter: 300,
            tol: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    pub sizes: Vec<usize>,
    pub iterations_run: usize,
    pub seed: u64,
    /// Objective after every Lloyd iteration of the winning restart.
    pub inertia_trace: Vec<f64>,
}

pub fn kmeans_fit(x: &Matrix, params: &KMeansParams) -> Result<ClusterModel> {
    let n = x.rows();
    let k = params.k;
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds {n} points")));
    }
    if params.n_init == 0 || params.max_iter == 0 {
        return Err(Error::InvalidParameter("n_init and max_iter must be positive".into()));
    }
    x.ensure_finite("k-means input")?;

    let mut best: Option<ClusterModel> = None;
    for restart in 0..params.n_init {
        let mut rng = SplitMix64::new(derive_seed(params.seed, restart as u64));
        let init = match params.init {
            Init::KMeansPlusPlus => kmeans_plus_plus(x, k, &mut rng),
            Init::Random => random_init(x, k, &mut rng),
        };
        let model = lloyd(x, init, params);
        if best.as_ref().map_or(true, |b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("n_init > 0"))
}

/// k-means++ seeding: each new centre is drawn with probability proportional
/// to the squared distance to the nearest centre chosen so far.
pub fn kmeans_plus_plus(x: &Matrix, k: usize, rng: &mut SplitMix64) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.below(n as u64) as usize;
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut nearest: Vec<f64> = x.iter_rows().map(|r| sq_dist(r, x.row(first))).collect();

    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Round-off can leave `target` beyond the final partial sum.
            pick.unwrap_or_else(|| nearest.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            // Every point coincides with a centre already.
            rng.below(n as u64) as usize
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(pick)));
        }
    }
    centroids
}

fn random_init(x: &Matrix, k: usize, rng: &mut SplitMix64) -> Matrix {
    let mut idx: Vec<usize> = (0..x.rows()).collect();
    rng.shuffle(&mut idx);
    x.select_rows(&idx[..k])
}

fn lloyd(x: &Matrix, mut centroids: Matrix, params: &KMeansParams) -> ClusterModel {
    let (n, k) = (x.rows(), centroids.rows());
    let mut assignments = vec![0usize; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..params.max_iter {
        iterations += 1;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest_centroid(&centroids, x.row(i));
            assignments[i] = c;
            dists[i] = d;
        }
        repair_empty(&mut assignments, &mut dists, k);

        let new_centroids = centroid_means(x, &assignments, k);
        let shift = (0..k)
            .map(|c| libm::sqrt(sq_dist(centroids.row(c), new_centroids.row(c))))
            .fold(0.0f64, f64::max);
        centroids = new_centroids;
        trace.push(inertia(x, &centroids, &assignments));
        if shift < params.tol {
            break;
        }
    }

    let sizes = cluster_sizes(&assignments, k);
    ClusterModel {
        k,
        inertia: *trace.last().expect("at least one iteration"),
        centroids,
        assignments,
        sizes,
        iterations_run: iterations,
        seed: params.seed,
        inertia_trace: trace,
    }
}

/// Moves, for each empty cluster, the point farthest from its centroid into it.
fn repair_empty(assignments: &mut [usize], dists: &mut [f64], k: usize) {
    let mut sizes = cluster_sizes(assignments, k);
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let donor = (0..assignments.len())
            .filter(|&i| sizes[assignments[i]] > 1)
            .fold(None::<usize>, |best, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            });
        if let Some(i) = donor {
            sizes[assignments[i]] -= 1;
            assignments[i] = c;
            dists[i] = 0.0;
            sizes[c] = 1;
        }
    }
}

fn centroid_means(x: &Matrix, assignments: &[usize], k: usize) -> Matrix {
    let mut sums = Matrix::zeros(k, x.cols());
    let mut counts = vec![0usize; k];
    for (row, &c) in x.iter_rows().zip(assignments) {
        counts[c] += 1;
        for (s, v) in sums.row_mut(c).iter_mut().zip(row) {
            *s += v;
        }
    }
    for c in 0..k {
        let cnt = counts[c].max(1) as f64;
        sums.row_mut(c).iter_mut().for_each(|s| *s /= cnt);
    }
    sums
}

#[inline]
fn nearest_centroid(centroids: &Matrix, point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter_rows().enumerate() {
        let d = sq_dist(point, centroid);
        // Strict comparison keeps the lowest index on ties.
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Nearest centroid (squared Euclidean) for each row; ties go to the lowest
/// cluster index.
pub fn kmeans_assign(m: &ClusterModel, x: &Matrix) -> Result<Vec<usize>> {
    if x.cols() != m.centroids.cols() {
        return Err(Error::Shape(format!(
            "model has dimension {}, points have {}",
            m.centroids.cols(),
            x.cols()
        )));
    }
    Ok(x.iter_rows().map(|r| nearest_centroid(&m.centroids, r).0).collect())
}

/// `sum_i |x_i - mu_{a(i)}|^2`.
pub fn inertia(x: &Matrix, centroids: &Matrix, assignments: &[usize]) -> f64 {
    x.iter_rows()
        .zip(assignments)
        .map(|(r, &c)| sq_dist(r, centroids.row(c)))
        .sum()
}

pub fn cluster_sizes(assignments: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &c in assignments {
        sizes[c] += 1;
    }
    sizes
}

/// `(k, inertia)` for each `k` in `ks`, every fit sharing `base`'s seed.
pub fn elbow_curve(x: &Matrix, ks: &[usize], base: &KMeansParams) -> Result<Vec<(usize, f64)>> {
    if ks.is_empty() {
        return Err(Error::Empty("k range"));
    }
    ks.iter()
        .map(|&k| {
            let params = KMeansParams { k, ..base.clone() };
            kmeans_fit(x, &params).map(|m| (k, m.inertia))
        })
        .collect()
}

/// Per-point silhouette `(b - a) / max(a, b)`; zero for members of singleton
/// clusters and wherever `a = b = 0`.
pub fn silhouette_samples(x: &Matrix, assignments: &[usize]) -> Result<Vec<f64>> {
    let n = x.rows();
    if assignments.len() != n {
        return Err(Error::Shape(format!(
            "{} assignments for {n} points",
            assignments.len()
        )));
    }
    if n < 3 {
        return Err(Error::InvalidParameter("silhouette needs at least 3 points".into()));
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let sizes = cluster_sizes(assignments, k);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::InvalidParameter(
            "silhouette is undefined for a single cluster".into(),
        ));
    }

    let mut out = vec![0.0; n];
    let mut sums = vec![0.0; k];
    for i in 0..n {
        let own = assignments[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[assignments[j]] += libm::sqrt(sq_dist(x.row(i), x.row(j)));
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        out[i] = if denom > 0.0 { (b - a) / denom } else { 0.0 };
    }
    Ok(out)
}

/// Mean silhouette over all points.
pub fn silhouette_score(x: &Matrix, assignments: &[usize]) -> Result<f64> {
    let s = silhouette_samples(x, assignments)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(rows: &[[f64; 2]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let x = points(&[[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [2.0, 7.0]]);
        let m = kmeans_fit(
            &x,
            &KMeansParams {
                k: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m.inertia, 0.0);
        let mut a = m.assignments.clone();
        a.sort_unstable();
        assert_eq!(a, [0, 1, 2, 3]);
    }

    #[test]
    fn k_one_is_the_mean() {
        let x = points(&[[0.0, 0.0], [2.0, 0.0], [4.0, 6.0]]);
        let m = kmeans_fit(
            &x,
            &KMeansParams {
                k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((m.centroids[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((m.centroids[(0, 1)] - 2.0).abs() < 1e-12);
        // Total squared deviation: 4+4 + 0+4 + 4+16.
        assert!((m.inertia - 32.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_k() {
        let x = points(&[[0.0, 0.0], [1.0, 1.0]]);
        assert!(kmeans_fit(
            &x,
            &KMeansParams {
                k: 0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(kmeans_fit(
            &x,
            &KMeansParams {
                k: 3,
                ..Default::default()
            }
        )
        .is_err());
        let bad = points(&[[0.0, f64::NAN], [1.0, 1.0]]);
        assert!(kmeans_fit(
            &bad,
            &KMeansParams {
                k: 1,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn assign_tie_goes_to_lowest_index() {
        let centroids = Matrix::from_rows(&[
            [10.0, 10.0],
            [20.0, 20.0],
            [-1.0, 0.0],
            [30.0, 30.0],
            [40.0, 40.0],
            [1.0, 0.0],
        ])
        .unwrap();
        let m = ClusterModel {
            k: 6,
            centroids,
            assignments: vec![],
            inertia: 0.0,
            sizes: vec![0; 6],
            iterations_run: 0,
            seed: 0,
            inertia_trace: vec![],
        };
        let a = kmeans_assign(&m, &points(&[[0.0, 0.0], [20.0, 20.0]])).unwrap();
        assert_eq!(a, [2, 1]);
        assert!(kmeans_assign(&m, &Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn silhouette_hand_evaluated_pairs() {
        // Pairs {(0,0),(0,0.1)} and {(10,0),(10,0.1)}. By symmetry every
        // point has a = 0.1 and b = (10 + sqrt(100.01)) / 2, so s = 1 - a/b.
        let x = points(&[[0.0, 0.0], [0.0, 0.1], [10.0, 0.0], [10.0, 0.1]]);
        let good = silhouette_score(&x, &[0, 0, 1, 1]).unwrap();
        let b = (10.0 + libm::sqrt(100.01)) / 2.0;
        assert!((good - (1.0 - 0.1 / b)).abs() < 1e-12);
        assert!(good > 0.95);
        let crossed = silhouette_score(&x, &[0, 1, 0, 1]).unwrap();
        assert!(crossed < 0.0);
    }

    #[test]
    fn silhouette_degenerate_conventions() {
        let x = points(&[[1.0, 1.0]; 4]);
        assert_eq!(silhouette_score(&x, &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(silhouette_score(&x, &[0, 0, 0, 0]).is_err());
        // Singleton cluster contributes zero.
        let x = points(&[[0.0, 0.0], [0.0, 1.0], [9.0, 9.0]]);
        let s = silhouette_samples(&x, &[0, 0, 1]).unwrap();
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn elbow_endpoints() {
        let x = points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 3.0], [4.0, 4.0]]);
        let curve = elbow_curve(&x, &[1, 2, 3, 4], &KMeansParams::default()).unwrap();
        let mean = [1.25, 1.75];
        let total: f64 = x.iter_rows().map(|r| sq_dist(r, &mean)).sum();
        assert!((curve[0].1 - total).abs() < 1e-12);
        assert_eq!(curve[3].1, 0.0);
        assert!(elbow_curve(&x, &[], &KMeansParams::default()).is_err());
    }

    #[test]
    fn identical_points_have_zero_inertia_for_all_k() {
        let x = points(&[[3.0, 3.0]; 6]);
        let curve = elbow_curve(&x, &[1, 2, 3, 6], &KMeansParams::default()).unwrap();
        assert!(curve.iter().all(|&(_, j)| j == 0.0));
    }

    #[test]
    fn empty_cluster_is_repaired() {
        let mut assignments = vec![0, 0, 0, 2];
        let mut dists = vec![1.0, 9.0, 4.0, 0.5];
        repair_empty(&mut assignments, &mut dists, 3);
        assert_eq!(assignments, [0, 1, 0, 2]);
    }
}
