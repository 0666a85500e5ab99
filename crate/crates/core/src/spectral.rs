//! FFT magnitude features.
//!
//! Each channel of a record is (optionally) min/max normalized, transformed
//! with a full-length FFT, reduced to the magnitudes of its first `N/2` bins
//! and scaled so its largest bin is 1. A record's feature row concatenates
//! the six channel blocks in V1, V2, V3, I1, I2, I3 order.
//!
//! Power-of-two lengths use an iterative radix-2 transform; any other length
//! goes through Bluestein's chirp-z algorithm on top of it, so every `N >= 1`
//! is exact (no implicit zero padding).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::normalize;
use crate::waveform::{Channel, Dataset, DatasetMeta, WaveformRecord, CHANNELS};

/// Forward DFT `X[k] = sum_n x[n] exp(-2 pi i k n / N)` of any length.
pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    if n <= 1 {
        return x.to_vec();
    }
    if n.is_power_of_two() {
        let mut buf = x.to_vec();
        radix2_in_place(&mut buf);
        buf
    } else {
        bluestein(x)
    }
}

/// Full-length DFT of a real signal.
pub fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&buf)
}

fn radix2_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }
    // Twiddles straight from sin/cos, not by repeated multiplication, so the
    // error stays at a few ulps for long transforms.
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| {
            let angle = -2.0 * PI * k as f64 / n as f64;
            Complex64::new(libm::cos(angle), libm::sin(angle))
        })
        .collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

fn bluestein(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let m = (2 * n - 1).next_power_of_two();
    // exp(-i pi k^2 / n); k^2 is reduced mod 2n first to keep the angle small.
    let chirp: Vec<Complex64> = (0..n)
        .map(|k| {
            let k2 = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
            let angle = -PI * k2 / n as f64;
            Complex64::new(libm::cos(angle), libm::sin(angle))
        })
        .collect();

    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..n {
        a[k] = x[k] * chirp[k];
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    radix2_in_place(&mut a);
    radix2_in_place(&mut b);
    // Inverse transform of the product via conjugation.
    let mut conv: Vec<Complex64> = a.iter().zip(&b).map(|(p, q)| (p * q).conj()).collect();
    radix2_in_place(&mut conv);
    let scale = 1.0 / m as f64;
    (0..n).map(|k| conv[k].conj() * scale * chirp[k]).collect()
}

/// How the transform length is chosen for a signal of `N` samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FftLength {
    /// Zero-pad to the next power of two.
    #[default]
    PadPow2,
    /// Transform exactly `N` samples.
    Exact,
}

impl FftLength {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            FftLength::PadPow2 => n.next_power_of_two(),
            FftLength::Exact => n,
        }
    }
}

/// One-sided magnitude spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// `|X[k]|` for `k = 0 .. fft_len / 2`.
    pub magnitudes: Vec<f64>,
    /// Transform length actually used (after any padding).
    pub fft_len: usize,
    pub bin_hz: f64,
    /// Set by [`normalize_spectrum`] when every magnitude is zero.
    pub degenerate: bool,
}

/// Magnitudes of the positive-frequency half of the DFT of `x`.
pub fn fft_magnitude(x: &[f64], sampling_rate_hz: f64, length: FftLength) -> Result<Spectrum> {
    if x.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "FFT needs at least 2 samples, got {}",
            x.len()
        )));
    }
    check_finite(x, "FFT input")?;
    let fft_len = length.resolve(x.len());
    let mut padded = x.to_vec();
    padded.resize(fft_len, 0.0);
    let full = fft_real(&padded);
    let magnitudes = full[..fft_len / 2].iter().map(|c| c.norm()).collect();
    Ok(Spectrum {
        magnitudes,
        fft_len,
        bin_hz: sampling_rate_hz / fft_len as f64,
        degenerate: false,
    })
}

/// Divides every magnitude by the spectrum maximum. An all-zero spectrum is
/// returned unchanged with `degenerate` set.
pub fn normalize_spectrum(s: &Spectrum) -> Spectrum {
    let max = s.magnitudes.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut out = s.clone();
    if max > 0.0 {
        out.magnitudes.iter_mut().for_each(|v| *v /= max);
        out.degenerate = false;
    } else {
        out.degenerate = true;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Min/max normalize each channel before the transform.
    pub normalize_input: bool,
    /// Use only the first `W` samples of each record.
    pub truncate: Option<usize>,
    pub fft_length: FftLength,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            normalize_input: true,
            truncate: None,
            fft_length: FftLength::PadPow2,
        }
    }
}

impl FeatureConfig {
    /// Samples per channel that enter the transform.
    pub fn input_len(&self, timesteps: usize) -> usize {
        self.truncate.map_or(timesteps, |w| w.min(timesteps))
    }

    pub fn fft_len(&self, timesteps: usize) -> usize {
        self.fft_length.resolve(self.input_len(timesteps))
    }

    /// Width of one channel block.
    pub fn block_len(&self, timesteps: usize) -> usize {
        self.fft_len(timesteps) / 2
    }
}

/// Feature row of one record plus per-channel degenerate flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordFeatures {
    pub values: Vec<f64>,
    pub degenerate: [bool; CHANNELS],
}

pub fn record_features(record: &WaveformRecord, meta: &DatasetMeta, cfg: &FeatureConfig) -> Result<RecordFeatures> {
    let t = record.timesteps();
    if t != meta.timesteps {
        return Err(Error::Shape(format!(
            "record {} has {t} timesteps, dataset has {}",
            record.id, meta.timesteps
        )));
    }
    let w = cfg.input_len(t);
    if w == 0 {
        return Err(Error::InvalidParameter("truncation to zero samples".into()));
    }
    let block = cfg.block_len(t);
    let mut values = Vec::with_capacity(CHANNELS * block);
    let mut degenerate = [false; CHANNELS];
    for ch in Channel::ALL {
        let raw = &record.channel_f64(ch)[..w];
        let input = if cfg.normalize_input {
            normalize(raw)?.values
        } else {
            raw.to_vec()
        };
        let spectrum = normalize_spectrum(&fft_magnitude(&input, meta.sampling_rate_hz, cfg.fft_length)?);
        degenerate[ch.index()] = spectrum.degenerate;
        values.extend_from_slice(&spectrum.magnitudes);
    }
    Ok(RecordFeatures { values, degenerate })
}

/// Row-per-record normalized spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub ids: Vec<u64>,
    pub values: Matrix,
    /// Channels whose spectrum was all zero, per record.
    pub degenerate: Vec<[bool; CHANNELS]>,
    pub fft_len: usize,
    pub bin_hz: f64,
}

impl FeatureMatrix {
    pub fn from_rows(ids: Vec<u64>, rows: Vec<RecordFeatures>, fft_len: usize, bin_hz: f64) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Shape("one id per feature row required".into()));
        }
        let degenerate = rows.iter().map(|r| r.degenerate).collect();
        let values: Vec<&[f64]> = rows.iter().map(|r| r.values.as_slice()).collect();
        let values = if values.is_empty() {
            Matrix::zeros(0, CHANNELS * (fft_len / 2))
        } else {
            Matrix::from_rows(&values)?
        };
        Ok(Self {
            ids,
            values,
            degenerate,
            fft_len,
            bin_hz,
        })
    }

    /// Plain matrix with the given ids; no degenerate information.
    pub fn from_matrix(ids: Vec<u64>, values: Matrix) -> Result<Self> {
        if ids.len() != values.rows() {
            return Err(Error::Shape(format!(
                "{} ids for {} feature rows",
                ids.len(),
                values.rows()
            )));
        }
        let degenerate = vec![[false; CHANNELS]; ids.len()];
        let fft_len = 2 * values.cols() / CHANNELS;
        Ok(Self {
            ids,
            values,
            degenerate,
            fft_len,
            bin_hz: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Feature matrix for a whole dataset, rows in record order.
pub fn build_features(ds: &Dataset, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    let rows = ds
        .records
        .iter()
        .map(|r| record_features(r, &ds.meta, cfg))
        .collect::<Result<Vec<_>>>()?;
    let fft_len = cfg.fft_len(ds.meta.timesteps);
    FeatureMatrix::from_rows(ds.ids(), rows, fft_len, ds.meta.sampling_rate_hz / fft_len as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, &v)| {
                    let angle = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
                    acc + v * Complex64::new(libm::cos(angle), libm::sin(angle))
                })
            })
            .collect()
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let c = -3.5;
        let s = fft_magnitude(&[c; 128], 6400.0, FftLength::Exact).unwrap();
        assert_eq!(s.magnitudes.len(), 64);
        assert!((s.magnitudes[0] - 128.0 * c.abs()).abs() < 1e-9);
        for &m in &s.magnitudes[1..] {
            assert!(m < 1e-9 * c.abs() * 128.0);
        }
        assert_eq!(s.bin_hz, 50.0);
    }

    #[test]
    fn integer_period_sinusoid_peaks_at_its_bin() {
        let x: Vec<f64> = (0..128).map(|n| libm::sin(2.0 * PI * 4.0 * n as f64 / 128.0)).collect();
        let s = fft_magnitude(&x, 6400.0, FftLength::Exact).unwrap();
        assert!((s.magnitudes[4] - 64.0).abs() < 1e-9);
        for (k, &m) in s.magnitudes.iter().enumerate() {
            if !(3..=5).contains(&k) {
                assert!(m < 1e-6, "bin {k}: {m}");
            }
        }
    }

    #[test]
    fn small_lengths_match_direct_dft() {
        let mut rng = crate::rng::SplitMix64::new(1);
        for n in 1..40 {
            let x: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.normal(), rng.normal())).collect();
            let got = fft(&x);
            let want = direct_dft(&x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).norm() < 1e-10 * (1.0 + w.norm()), "n={n}");
            }
        }
    }

    #[test]
    fn padding_records_the_transform_length() {
        let s = fft_magnitude(&[1.0; 100], 6400.0, FftLength::PadPow2).unwrap();
        assert_eq!(s.fft_len, 128);
        assert_eq!(s.magnitudes.len(), 64);
        assert_eq!(s.bin_hz, 50.0);
        let s = fft_magnitude(&[1.0; 100], 6400.0, FftLength::Exact).unwrap();
        assert_eq!(s.magnitudes.len(), 50);
    }

    #[test]
    fn fft_input_errors() {
        assert!(fft_magnitude(&[1.0], 1.0, FftLength::Exact).is_err());
        assert!(fft_magnitude(&[1.0, f64::INFINITY], 1.0, FftLength::Exact).is_err());
    }

    #[test]
    fn normalize_spectrum_cases() {
        let s = Spectrum {
            magnitudes: vec![2.0, 8.0, 4.0],
            fft_len: 6,
            bin_hz: 1.0,
            degenerate: false,
        };
        assert_eq!(normalize_spectrum(&s).magnitudes, [0.25, 1.0, 0.5]);
        let z = Spectrum {
            magnitudes: vec![0.0; 3],
            ..s
        };
        let nz = normalize_spectrum(&z);
        assert_eq!(nz.magnitudes, [0.0; 3]);
        assert!(nz.degenerate);
    }
}
