//! Additive decomposition identities.

use faultclust_core::preprocess::decompose;
use faultclust_core::rng::SplitMix64;
use proptest::prelude::*;

fn noisy_wave(n: usize, period: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|t| {
            let phase = 2.0 * std::f64::consts::PI * t as f64 / period as f64;
            3.0 * phase.sin() + 0.002 * t as f64 + 0.1 * rng.normal()
        })
        .collect()
}

fn check(y: &[f64], period: usize) {
    let d = decompose(y, period).unwrap();
    for (i, v) in y.iter().enumerate() {
        // The residual is defined as the remainder, so this holds bit-for-bit.
        assert_eq!(v - d.trend[i] - d.seasonal[i], d.residual[i], "index {i}");
    }
    for i in 0..y.len() - period {
        assert_eq!(d.seasonal[i], d.seasonal[i + period], "index {i}");
    }
    let one_cycle: f64 = d.seasonal[..period].iter().sum();
    assert!(one_cycle.abs() < 1e-9 * period as f64);
    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (a, b) in d.reconstruct().iter().zip(y) {
        assert!((a - b).abs() <= 8.0 * f64::EPSILON * scale);
    }
}

#[test]
fn identity_and_periodicity_on_fault_length_records() {
    check(&noisy_wave(2048, 128, 1), 128);
    check(&noisy_wave(6400, 128, 2), 128);
    check(&noisy_wave(301, 7, 3), 7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identity_holds_for_random_series(
        period in 2usize..40,
        extra in 0usize..200,
        seed in any::<u64>(),
    ) {
        let n = 2 * period + extra;
        let mut rng = SplitMix64::new(seed);
        let y: Vec<f64> = (0..n).map(|_| rng.uniform(-1e3, 1e3)).collect();
        check(&y, period);
    }
}
