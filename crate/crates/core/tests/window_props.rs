//! Min/max decimation against a brute-force bucket scan.

use faultclust_core::rng::SplitMix64;
use faultclust_core::synth::{generate, EventType, FaultSpec};
use faultclust_core::waveform::DatasetMeta;
use faultclust_core::window::{decimate, record_window, Overlays, Series, WindowRequest};
use proptest::prelude::*;

fn brute_force_check(x: &[f64], start: usize, end: usize, max_points: usize) {
    match decimate(x, start..end, max_points).unwrap() {
        Series::Raw { start: s, values } => {
            assert!(end - start <= max_points);
            assert_eq!(s, start);
            assert_eq!(values, &x[start..end]);
        }
        Series::MinMax { buckets } => {
            assert!(buckets.len() <= max_points);
            assert_eq!(buckets.first().unwrap().start, start);
            assert_eq!(buckets.last().unwrap().end, end);
            for (i, b) in buckets.iter().enumerate() {
                if i > 0 {
                    assert_eq!(buckets[i - 1].end, b.start);
                }
                let slice = &x[b.start..b.end];
                assert!(!slice.is_empty());
                let lo = slice.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert_eq!((b.min, b.max), (lo, hi));
            }
            let glo = x[start..end].iter().cloned().fold(f64::INFINITY, f64::min);
            let ghi = x[start..end].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let extent = Series::MinMax { buckets }.extent().unwrap();
            assert_eq!(extent, (glo, ghi));
        }
    }
}

#[test]
fn full_record_thousand_buckets() {
    let mut rng = SplitMix64::new(1);
    let x: Vec<f64> = (0..2048).map(|_| rng.normal()).collect();
    brute_force_check(&x, 0, 2048, 1000);
}

#[test]
fn raw_when_budget_covers_range() {
    let meta = DatasetMeta::new(1, 2048);
    let spec = FaultSpec {
        event_type: EventType::Sc3ph,
        inception_sample: 600,
        duration_samples: 300,
        severity: 0.7,
        noise_std: 0.02,
        seed: 3,
    };
    let (r, _) = generate(&spec, &meta, 42).unwrap();
    let req = WindowRequest {
        start: 0,
        end: 2048,
        max_points: 4096,
    };
    let w = record_window(&r, &meta, &req, Overlays::default()).unwrap();
    for (cw, c) in w.channels.iter().zip(faultclust_core::waveform::Channel::ALL) {
        let expected = r.channel_f64(c);
        assert_eq!(
            cw.series,
            Series::Raw {
                start: 0,
                values: expected
            }
        );
        assert!(cw.overlay.is_none());
    }
}

#[test]
fn open_circuit_zero_overlay_segment() {
    let meta = DatasetMeta::new(1, 2048);
    let spec = FaultSpec {
        event_type: EventType::OpenCircuit,
        inception_sample: 700,
        duration_samples: 400,
        severity: 1.0,
        noise_std: 0.02,
        seed: 1,
    };
    let (r, _) = generate(&spec, &meta, 0).unwrap();
    let req = WindowRequest {
        start: 0,
        end: 2048,
        max_points: 500,
    };
    let w = record_window(&r, &meta, &req, Overlays::parse("zero").unwrap()).unwrap();
    let i2 = &w.channels[4];
    assert_eq!(i2.channel, "I2");
    let zero = i2.overlay.as_ref().unwrap().zero.as_ref().unwrap();
    assert!(zero.iter().any(|&(s, e)| s <= 700 && e >= 1100), "{zero:?}");
    assert!(w.channels[3]
        .overlay
        .as_ref()
        .unwrap()
        .zero
        .as_ref()
        .unwrap()
        .is_empty());
    assert!(w.zero_sequence_current.len() <= 500);
}

#[test]
fn one_sample_spike_survives_zoom_out() {
    let mut x = vec![0.0; 6400];
    x[3210] = -9.0;
    let Series::MinMax { buckets } = decimate(&x, 0..6400, 100).unwrap() else {
        panic!()
    };
    let hit: Vec<_> = buckets.iter().filter(|b| b.min == -9.0).collect();
    assert_eq!(hit.len(), 1);
    assert!(hit[0].start <= 3210 && 3210 < hit[0].end);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_windows_match_brute_force(
        len in 2usize..3000,
        a in 0usize..3000,
        b in 0usize..3000,
        max_points in 100usize..1200,
        seed in any::<u64>(),
    ) {
        let (start, end) = (a.min(b) % len, (a.max(b) % len) + 1);
        prop_assume!(start < end);
        let mut rng = SplitMix64::new(seed);
        let x: Vec<f64> = (0..len).map(|_| rng.uniform(-5.0, 5.0)).collect();
        brute_force_check(&x, start, end, max_points);
    }
}
