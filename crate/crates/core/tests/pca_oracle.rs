//! PCA against a dense covariance eigendecomposition computed with nalgebra.

use faultclust_core::pca::{pca_fit, PcaTarget};
use faultclust_core::rng::SplitMix64;
use faultclust_core::{Error, Matrix};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Correlated Gaussian data: latent factors mixed into `d` columns plus
/// small isotropic noise.
fn correlated(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = SplitMix64::new(seed);
    let latent = 4.min(d);
    let mix: Vec<f64> = (0..latent * d).map(|_| rng.normal()).collect();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let z: Vec<f64> = (0..latent).map(|k| rng.normal() * (latent - k) as f64).collect();
        for j in 0..d {
            let v: f64 = (0..latent).map(|k| z[k] * mix[k * d + j]).sum();
            data.push(v + 0.05 * rng.normal() + 3.0);
        }
    }
    Matrix::from_vec(n, d, data).unwrap()
}

/// Eigenvalues of the sample covariance, descending.
fn oracle_eigenvalues(x: &Matrix) -> Vec<f64> {
    let (n, d) = (x.rows(), x.cols());
    let m = DMatrix::from_row_slice(n, d, x.as_slice());
    let mean = m.row_mean();
    let mut c = m.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    let cov = c.transpose() * &c / (n as f64 - 1.0);
    let mut ev: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

fn check_against_oracle(x: &Matrix) {
    let model = pca_fit(x, PcaTarget::VarianceRatio(1.0)).unwrap();
    let ev = oracle_eigenvalues(x);
    let total: f64 = ev.iter().map(|v| v.max(0.0)).sum();
    for (k, ratio) in model.explained_variance_ratio.iter().enumerate() {
        let expected = ev[k] / total;
        assert!((ratio - expected).abs() <= 1e-8, "component {k}: {ratio} vs {expected}");
        assert!((model.explained_variance[k] - ev[k]).abs() <= 1e-8 * ev[0]);
    }
}

#[test]
fn covariance_route_matches_oracle() {
    check_against_oracle(&correlated(200, 12, 1));
}

#[test]
fn gram_route_matches_oracle() {
    // More features than rows takes the N x N Gram path.
    check_against_oracle(&correlated(30, 90, 2));
}

#[test]
fn components_are_orthonormal_with_positive_dominant_loading() {
    let x = correlated(80, 20, 3);
    let model = pca_fit(&x, PcaTarget::Components(6)).unwrap();
    let p = &model.components;
    for a in 0..p.cols() {
        let col_a = p.column(a);
        let (big, _) = col_a
            .iter()
            .enumerate()
            .max_by(|u, v| u.1.abs().total_cmp(&v.1.abs()))
            .unwrap();
        assert!(col_a[big] > 0.0);
        for b in 0..p.cols() {
            let dot: f64 = col_a.iter().zip(p.column(b)).map(|(u, v)| u * v).sum();
            let expected = if a == b { 1.0 } else { 0.0 };
            assert!((dot - expected).abs() < 1e-10);
        }
    }
}

#[test]
fn variance_target_picks_smallest_sufficient_k() {
    let x = correlated(150, 15, 4);
    let full = pca_fit(&x, PcaTarget::VarianceRatio(1.0)).unwrap();
    let mut cumulative = 0.0;
    let mut expected_k = 0;
    for r in &full.explained_variance_ratio {
        cumulative += r;
        expected_k += 1;
        if cumulative >= 0.95 {
            break;
        }
    }
    let model = pca_fit(&x, PcaTarget::VarianceRatio(0.95)).unwrap();
    assert_eq!(model.n_components(), expected_k);
    let kept: f64 = model.explained_variance_ratio.iter().sum();
    assert!(kept >= 0.95 - 1e-12);
}

#[test]
fn full_rank_round_trip_is_lossless() {
    let x = correlated(40, 8, 5);
    let model = pca_fit(&x, PcaTarget::VarianceRatio(1.0)).unwrap();
    let back = model.inverse_transform(&model.transform(&x).unwrap()).unwrap();
    for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn identical_rows_are_degenerate() {
    let x = Matrix::from_vec(5, 3, [1.0, 2.0, 3.0].repeat(5)).unwrap();
    assert_eq!(
        pca_fit(&x, PcaTarget::VarianceRatio(0.95)),
        Err(Error::Degenerate("all rows are identical"))
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ratios_match_oracle_for_random_shapes(n in 3usize..40, d in 1usize..25, seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.uniform(-5.0, 5.0)).collect()).unwrap();
        let model = pca_fit(&x, PcaTarget::VarianceRatio(1.0)).unwrap();
        let ratios: f64 = model.explained_variance_ratio.iter().sum();
        prop_assert!((ratios - 1.0).abs() < 1e-9);
        prop_assert!(model.explained_variance_ratio.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        check_against_oracle(&x);
    }
}
