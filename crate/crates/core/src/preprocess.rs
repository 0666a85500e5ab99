//! Per-channel preprocessing: min/max normalization, additive seasonal
//! decomposition, zero-signal indicators and statistical anomaly flags.
//!
//! Decomposition and anomaly flags never feed the clustering path. They are
//! overlays for the expert labeling view.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

/// Relative zero threshold (fraction of the channel peak).
pub const DEFAULT_ZERO_EPSILON: f64 = 0.01;
/// Default anomaly threshold in (robust) standard deviations.
pub const DEFAULT_K_SIGMA: f64 = 3.0;
/// Median absolute deviation to standard deviation for Gaussian data.
const MAD_TO_STD: f64 = 1.4826;
/// Scale floor, relative to the signal peak, below which deviations count as
/// round-off.
const SCALE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSignal {
    pub values: Vec<f64>,
    /// Input was constant; `values` are all zero.
    pub degenerate: bool,
}

/// Maps `x` affinely onto `[-1, 1]`: `2 (x - min) / (max - min) - 1`.
///
/// The minimum lands on exactly `-1` and the maximum on exactly `+1`. A
/// constant input maps to all zeros with `degenerate` set.
pub fn normalize(x: &[f64]) -> Result<NormalizedSignal> {
    if x.is_empty() {
        return Err(Error::Empty("signal"));
    }
    check_finite(x, "signal")?;
    let (min, max) = min_max(x);
    if min == max {
        return Ok(NormalizedSignal {
            values: vec![0.0; x.len()],
            degenerate: true,
        });
    }
    if min == -1.0 && max == 1.0 {
        // The map is the identity here; skip it so re-normalizing is exact.
        return Ok(NormalizedSignal {
            values: x.to_vec(),
            degenerate: false,
        });
    }
    let range = max - min;
    let values = x.iter().map(|&v| 2.0 * ((v - min) / range) - 1.0).collect();
    Ok(NormalizedSignal {
        values,
        degenerate: false,
    })
}

fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
    pub period: usize,
    /// Indices where the centered moving-average window is complete. Outside
    /// this range the trend repeats the nearest defined value.
    pub trend_defined: Range<usize>,
    pub zero_indicator: Vec<bool>,
    /// Filled by [`detect_anomalies`]; all false until then.
    pub anomaly_mask: Vec<bool>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.trend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trend.is_empty()
    }

    /// `trend + seasonal + residual` at every index.
    pub fn reconstruct(&self) -> Vec<f64> {
        self.trend
            .iter()
            .zip(&self.seasonal)
            .zip(&self.residual)
            .map(|((t, s), e)| t + s + e)
            .collect()
    }
}

/// Parameters of the zero-signal run detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroParams {
    pub epsilon: f64,
    pub min_run: usize,
}

impl ZeroParams {
    /// Default detector for a given decomposition period: 1 % of the channel
    /// peak held for at least a quarter cycle.
    pub fn for_period(period: usize) -> Self {
        Self {
            epsilon: DEFAULT_ZERO_EPSILON,
            min_run: (period / 4).max(1),
        }
    }
}

/// Additive decomposition with the default zero detector.
pub fn decompose(y: &[f64], period: usize) -> Result<Decomposition> {
    decompose_with(y, period, ZeroParams::for_period(period))
}

/// Additive decomposition `y = trend + seasonal + residual`.
///
/// - trend: centered moving average over one period. Even periods use the
///   `[1/2, 1, .., 1, 1/2] / period` window so the filter stays centered.
/// - seasonal: per-phase mean of `y - trend` (phase = index mod period) over
///   the indices with a defined trend, shifted to zero mean over one period
///   and tiled.
/// - residual: the exact remainder, so the identity holds at every index.
pub fn decompose_with(y: &[f64], period: usize, zero: ZeroParams) -> Result<Decomposition> {
    if period < 2 {
        return Err(Error::InvalidParameter(format!("period {period} < 2")));
    }
    if y.len() < 2 * period {
        return Err(Error::InvalidParameter(format!(
            "series of length {} is shorter than two periods of {period}",
            y.len()
        )));
    }
    check_finite(y, "series")?;
    let n = y.len();

    let (weights, half) = moving_average_window(period);
    let defined = half..n - half;
    let mut trend = vec![0.0; n];
    for i in defined.clone() {
        let window = &y[i - half..=i + half];
        trend[i] = window.iter().zip(&weights).map(|(v, w)| v * w).sum();
    }
    let first = trend[defined.start];
    let last = trend[defined.end - 1];
    trend[..defined.start].iter_mut().for_each(|t| *t = first);
    trend[defined.end..].iter_mut().for_each(|t| *t = last);

    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for i in defined.clone() {
        sums[i % period] += y[i] - trend[i];
        counts[i % period] += 1;
    }
    let mut phase_means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let centre = phase_means.iter().sum::<f64>() / period as f64;
    phase_means.iter_mut().for_each(|m| *m -= centre);
    let seasonal: Vec<f64> = (0..n).map(|i| phase_means[i % period]).collect();

    let residual = (0..n).map(|i| y[i] - trend[i] - seasonal[i]).collect();
    let zero_indicator = zero_indicator(y, zero.epsilon, zero.min_run)?;

    Ok(Decomposition {
        trend,
        seasonal,
        residual,
        period,
        trend_defined: defined,
        zero_indicator,
        anomaly_mask: vec![false; n],
    })
}

fn moving_average_window(period: usize) -> (Vec<f64>, usize) {
    let p = period as f64;
    if period % 2 == 0 {
        let mut w = vec![1.0 / p; period + 1];
        w[0] = 0.5 / p;
        w[period] = 0.5 / p;
        (w, period / 2)
    } else {
        (vec![1.0 / p; period], (period - 1) / 2)
    }
}

/// Marks samples belonging to runs of at least `min_run` consecutive values
/// with `|x| <= epsilon * max|x|`. An all-zero signal uses `epsilon` as an
/// absolute threshold (and is therefore flagged everywhere).
pub fn zero_indicator(x: &[f64], epsilon: f64, min_run: usize) -> Result<Vec<bool>> {
    if x.is_empty() {
        return Err(Error::Empty("signal"));
    }
    if !(epsilon > 0.0) || min_run == 0 {
        return Err(Error::InvalidParameter(format!(
            "zero indicator needs epsilon > 0 and min_run >= 1 (got {epsilon}, {min_run})"
        )));
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = if peak > 0.0 { epsilon * peak } else { epsilon };

    let mut out = vec![false; x.len()];
    let mut run_start = None;
    for i in 0..=x.len() {
        let small = i < x.len() && x[i].abs() <= threshold;
        match (small, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                if i - s >= min_run {
                    out[s..i].iter_mut().for_each(|o| *o = true);
                }
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Flags samples whose residual deviates more than `k_sigma` standard
/// deviations from its mean, whose trend deviates more than `k_sigma` robust
/// (MAD-scaled) deviations from its median, or where the zero indicator is
/// set. The mask is stored in `d.anomaly_mask` and returned.
///
/// Both scales are floored at `1e-9` times the signal peak so that round-off
/// on clean signals is never reported.
pub fn detect_anomalies(d: &mut Decomposition, k_sigma: f64) -> Result<Vec<bool>> {
    if !(k_sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("k_sigma {k_sigma} must be positive")));
    }
    let n = d.len();
    if n == 0 {
        return Err(Error::Empty("decomposition"));
    }
    let peak = d.reconstruct().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = SCALE_FLOOR * peak;

    let e_mean = d.residual.iter().sum::<f64>() / n as f64;
    let e_var = d.residual.iter().map(|e| (e - e_mean) * (e - e_mean)).sum::<f64>() / n as f64;
    let e_scale = libm::sqrt(e_var).max(floor);

    let t_median = median(&d.trend);
    let deviations: Vec<f64> = d.trend.iter().map(|t| (t - t_median).abs()).collect();
    let t_scale = (MAD_TO_STD * median(&deviations)).max(floor);

    let mask: Vec<bool> = (0..n)
        .map(|i| {
            (d.residual[i] - e_mean).abs() > k_sigma * e_scale
                || (d.trend[i] - t_median).abs() > k_sigma * t_scale
                || d.zero_indicator[i]
        })
        .collect();
    d.anomaly_mask.clone_from(&mask);
    Ok(mask)
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        0.5 * (sorted[m - 1] + sorted[m])
    } else {
        sorted[m]
    }
}
