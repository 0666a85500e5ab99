//! Principal component analysis.
//!
//! Fitting eigendecomposes whichever of the covariance matrix (`D x D`) or
//! the Gram matrix of centered rows (`N x N`) is smaller; both share the
//! non-zero spectrum. Components are re-orthonormalized and carry a fixed
//! sign (largest-magnitude loading positive) so fits are reproducible.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::matrix::Matrix;

/// Default fraction of variance to keep.
pub const DEFAULT_VARIANCE_TARGET: f64 = 0.95;

/// Slack when comparing cumulative ratios to the target, so a target of 1.0
/// is reachable despite round-off.
const RATIO_SLACK: f64 = 1e-12;

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcaTarget {
    /// Smallest `K` whose cumulative explained-variance ratio reaches the
    /// value, in `(0, 1]`.
    VarianceRatio(f64),
    /// At most this many components (fewer if the data rank is lower).
    Components(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `D x K`, orthonormal columns.
    pub components: Matrix,
    /// Variance along each kept component (eigenvalues, `N - 1` normalized).
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Numerical rank of the centered data.
    pub rank: usize,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.cols()
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// `(X - mean) P`, shape `N x K`.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        pca_transform(self, x)
    }

    /// `Z P^T + mean`.
    pub fn inverse_transform(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.n_components() {
            return Err(Error::Shape(format!(
                "expected {} score columns, got {}",
                self.n_components(),
                z.cols()
            )));
        }
        let mut out = z.matmul(&self.components.transpose())?;
        for i in 0..out.rows() {
            for (v, m) in out.row_mut(i).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(out)
    }
}

pub fn pca_fit(x: &Matrix, target: PcaTarget) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::InvalidParameter(format!("PCA needs at least 2 rows, got {n}")));
    }
    if d == 0 {
        return Err(Error::Empty("feature columns"));
    }
    match target {
        PcaTarget::VarianceRatio(t) if !(t > 0.0 && t <= 1.0) => {
            return Err(Error::InvalidParameter(format!("variance target {t} not in (0, 1]")));
        }
        PcaTarget::Components(0) => {
            return Err(Error::InvalidParameter("zero components requested".into()));
        }
        _ => {}
    }
    x.ensure_finite("PCA input")?;
    if x.iter_rows().all(|r| r == x.row(0)) {
        return Err(Error::Degenerate("all rows are identical"));
    }

    let mean = x.column_means();
    let mut centered = x.clone();
    for i in 0..n {
        for (v, m) in centered.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let dof = (n - 1) as f64;
    let ct = centered.transpose();

    // Eigenvalues plus unnormalized directions in feature space, descending.
    let (values, directions) = if d <= n {
        let mut cov = ct.matmul(&centered)?;
        scale_in_place(&mut cov, 1.0 / dof);
        let eig = symmetric_eigen(&cov)?;
        (eig.values, eig.vectors)
    } else {
        let mut gram = centered.matmul(&ct)?;
        scale_in_place(&mut gram, 1.0 / dof);
        let eig = symmetric_eigen(&gram)?;
        (eig.values, ct.matmul(&eig.vectors)?)
    };

    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let lmax = values.first().copied().unwrap_or(0.0);
    if !(lmax > 0.0) {
        return Err(Error::Degenerate("centered data has zero variance"));
    }
    let tol = lmax * n.max(d) as f64 * f64::EPSILON;
    let rank = values.iter().take_while(|&&v| v > tol).count();

    let ratios: Vec<f64> = values[..rank].iter().map(|v| v / total).collect();
    let k = match target {
        PcaTarget::VarianceRatio(t) => {
            let mut cum = 0.0;
            let mut k = rank;
            for (i, r) in ratios.iter().enumerate() {
                cum += r;
                if cum >= t - RATIO_SLACK {
                    k = i + 1;
                    break;
                }
            }
            k
        }
        PcaTarget::Components(c) => c.min(rank),
    };

    let mut components = Matrix::zeros(d, k);
    for j in 0..k {
        for r in 0..d {
            components[(r, j)] = directions[(r, j)];
        }
    }
    orthonormalize_columns(&mut components);
    fix_signs(&mut components);

    Ok(PcaModel {
        mean,
        components,
        explained_variance: values[..k].to_vec(),
        explained_variance_ratio: ratios[..k].to_vec(),
        rank,
    })
}

pub fn pca_transform(m: &PcaModel, x: &Matrix) -> Result<Matrix> {
    if x.cols() != m.n_features() {
        return Err(Error::Shape(format!(
            "model has {} features, input has {}",
            m.n_features(),
            x.cols()
        )));
    }
    let mut centered = x.clone();
    for i in 0..centered.rows() {
        for (v, mu) in centered.row_mut(i).iter_mut().zip(&m.mean) {
            *v -= mu;
        }
    }
    centered.matmul(&m.components)
}

fn scale_in_place(m: &mut Matrix, s: f64) {
    for i in 0..m.rows() {
        m.row_mut(i).iter_mut().for_each(|v| *v *= s);
    }
}

/// Modified Gram-Schmidt, applied twice.
fn orthonormalize_columns(m: &mut Matrix) {
    let (d, k) = (m.rows(), m.cols());
    for _ in 0..2 {
        for j in 0..k {
            for p in 0..j {
                let dot: f64 = (0..d).map(|r| m[(r, j)] * m[(r, p)]).sum();
                for r in 0..d {
                    m[(r, j)] -= dot * m[(r, p)];
                }
            }
            let norm = libm::sqrt((0..d).map(|r| m[(r, j)] * m[(r, j)]).sum::<f64>());
            for r in 0..d {
                m[(r, j)] /= norm;
            }
        }
    }
}

fn fix_signs(m: &mut Matrix) {
    for j in 0..m.cols() {
        let mut best = 0;
        for r in 1..m.rows() {
            if m[(r, j)].abs() > m[(best, j)].abs() {
                best = r;
            }
        }
        if m[(best, j)] < 0.0 {
            for r in 0..m.rows() {
                m[(r, j)] = -m[(r, j)];
            }
        }
    }
}
