//! Viewer payloads: min/max decimation, zero-sequence traces and
//! decomposition overlays for a sample range of one record.
//!
//! Decimation splits the range into at most `max_points` contiguous buckets
//! and reports each bucket's minimum and maximum, so a one-sample spike is
//! never lost when zoomed out. When the range already fits the budget the
//! samples are returned verbatim.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{decompose, detect_anomalies, DEFAULT_K_SIGMA};
use crate::waveform::{Channel, DatasetMeta, WaveformRecord};

/// Smallest accepted decimation budget.
pub const MIN_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    /// First sample index (absolute, inclusive).
    pub start: usize,
    /// One past the last sample index.
    pub end: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Series {
    /// Every sample of the range, starting at `start`.
    Raw {
        start: usize,
        values: Vec<f64>,
    },
    MinMax {
        buckets: Vec<Bucket>,
    },
}

impl Series {
    /// Number of points (raw samples or buckets) in the series.
    pub fn len(&self) -> usize {
        match self {
            Series::Raw { values, .. } => values.len(),
            Series::MinMax { buckets } => buckets.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Overall (min, max) of the represented samples.
    pub fn extent(&self) -> Option<(f64, f64)> {
        let fold = |acc: Option<(f64, f64)>, (lo, hi): (f64, f64)| match acc {
            None => Some((lo, hi)),
            Some((a, b)) => Some((a.min(lo), b.max(hi))),
        };
        match self {
            Series::Raw { values, .. } => values.iter().map(|&v| (v, v)).fold(None, fold),
            Series::MinMax { buckets } => buckets.iter().map(|b| (b.min, b.max)).fold(None, fold),
        }
    }
}

/// Bucket boundaries splitting `range` into `buckets` nearly equal parts.
pub fn bucket_bounds(range: Range<usize>, buckets: usize) -> Vec<Range<usize>> {
    let len = range.len();
    let buckets = buckets.min(len).max(1);
    (0..buckets)
        .map(|b| range.start + b * len / buckets..range.start + (b + 1) * len / buckets)
        .collect()
}

/// Min/max decimation of `x[range]` to at most `max_points` buckets; the
/// raw slice when it already fits.
pub fn decimate(x: &[f64], range: Range<usize>, max_points: usize) -> Result<Series> {
    if range.start >= range.end || range.end > x.len() {
        return Err(Error::InvalidParameter(format!(
            "range {}..{} is invalid for {} samples",
            range.start,
            range.end,
            x.len()
        )));
    }
    if max_points == 0 {
        return Err(Error::InvalidParameter("max_points must be positive".into()));
    }
    if range.len() <= max_points {
        return Ok(Series::Raw {
            start: range.start,
            values: x[range].to_vec(),
        });
    }
    let buckets = bucket_bounds(range, max_points)
        .into_iter()
        .map(|r| {
            let (min, max) = x[r.clone()]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            Bucket {
                start: r.start,
                end: r.end,
                min,
                max,
            }
        })
        .collect();
    Ok(Series::MinMax { buckets })
}

/// Zero-sequence component `(a + b + c) / 3`.
pub fn zero_sequence(a: &[f64], b: &[f64], c: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() || a.len() != c.len() {
        return Err(Error::Shape(format!(
            "phase lengths {}, {}, {} differ",
            a.len(),
            b.len(),
            c.len()
        )));
    }
    Ok(a.iter().zip(b).zip(c).map(|((a, b), c)| (a + b + c) / 3.0).collect())
}

/// Which decomposition overlays to attach.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overlays {
    pub trend: bool,
    pub residual: bool,
    pub zero: bool,
    pub anomaly: bool,
}

impl Overlays {
    pub fn any(&self) -> bool {
        self.trend || self.residual || self.zero || self.anomaly
    }

    /// Parses a comma-separated list such as `"trend,zero"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut o = Overlays::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "trend" => o.trend = true,
                "residual" => o.residual = true,
                "zero" => o.zero = true,
                "anomaly" => o.anomaly = true,
                other => return Err(Error::InvalidParameter(format!("unknown overlay {other:?}"))),
            }
        }
        Ok(o)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRequest {
    pub start: usize,
    pub end: usize,
    pub max_points: usize,
}

impl WindowRequest {
    pub fn validate(&self, timesteps: usize) -> Result<()> {
        if !(self.start < self.end && self.end <= timesteps) {
            return Err(Error::InvalidParameter(format!(
                "range {}..{} must satisfy 0 <= start < end <= {timesteps}",
                self.start, self.end
            )));
        }
        if self.max_points < MIN_POINTS {
            return Err(Error::InvalidParameter(format!(
                "max_points {} is below {MIN_POINTS}",
                self.max_points
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelOverlay {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trend: Option<Series>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<Series>,
    /// Zero-indicator runs clipped to the window, absolute `[start, end)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero: Option<Vec<(usize, usize)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anomaly: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelWindow {
    pub channel: String,
    pub series: Series,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlay: Option<ChannelOverlay>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPayload {
    pub sample_id: u64,
    pub start: usize,
    pub end: usize,
    pub timesteps: usize,
    pub sampling_rate_hz: f64,
    pub channels: Vec<ChannelWindow>,
    pub zero_sequence_voltage: Series,
    pub zero_sequence_current: Series,
}

/// Builds the viewer payload for one record.
///
/// Overlays are computed on the whole channel (the decomposition needs full
/// cycles on both sides) and then clipped to the requested range.
pub fn record_window(
    record: &WaveformRecord,
    meta: &DatasetMeta,
    req: &WindowRequest,
    overlays: Overlays,
) -> Result<WindowPayload> {
    let n = record.timesteps();
    req.validate(n)?;
    let range = req.start..req.end;
    let period = meta.period();

    let data: Vec<Vec<f64>> = Channel::ALL.iter().map(|&c| record.channel_f64(c)).collect();
    let mut channels = Vec::with_capacity(data.len());
    for (c, x) in Channel::ALL.iter().zip(&data) {
        let overlay = if overlays.any() {
            let mut d = decompose(x, period)?;
            let anomalies = if overlays.anomaly {
                Some(detect_anomalies(&mut d, DEFAULT_K_SIGMA)?)
            } else {
                None
            };
            Some(ChannelOverlay {
                trend: overlays
                    .trend
                    .then(|| decimate(&d.trend, range.clone(), req.max_points))
                    .transpose()?,
                residual: overlays
                    .residual
                    .then(|| decimate(&d.residual, range.clone(), req.max_points))
                    .transpose()?,
                zero: overlays.zero.then(|| runs(&d.zero_indicator, range.clone())),
                anomaly: anomalies.map(|m| runs(&m, range.clone())),
            })
        } else {
            None
        };
        channels.push(ChannelWindow {
            channel: String::from(c.name()),
            series: decimate(x, range.clone(), req.max_points)?,
            overlay,
        });
    }
    let v0 = zero_sequence(&data[0], &data[1], &data[2])?;
    let i0 = zero_sequence(&data[3], &data[4], &data[5])?;
    Ok(WindowPayload {
        sample_id: record.id,
        start: req.start,
        end: req.end,
        timesteps: n,
        sampling_rate_hz: meta.sampling_rate_hz,
        channels,
        zero_sequence_voltage: decimate(&v0, range.clone(), req.max_points)?,
        zero_sequence_current: decimate(&i0, range, req.max_points)?,
    })
}

/// Maximal runs of `true` inside `range`, as absolute `(start, end)` pairs.
pub fn runs(mask: &[bool], range: Range<usize>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open = None;
    for i in range.clone() {
        match (mask[i], open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push((s, range.end));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn small_ranges_are_verbatim() {
        let x: Vec<f64> = (0..50).map(f64::from).collect();
        assert_eq!(
            decimate(&x, 0..50, 100).unwrap(),
            Series::Raw {
                start: 0,
                values: x.clone()
            }
        );
    }

    #[test]
    fn buckets_cover_range_and_keep_spike() {
        let mut x = vec![0.0; 2048];
        x[1234] = 7.0;
        let s = decimate(&x, 0..2048, 1000).unwrap();
        let Series::MinMax { buckets } = &s else {
            panic!("expected buckets")
        };
        assert_eq!(buckets.len(), 1000);
        assert_eq!(buckets[0].start, 0);
        assert_eq!(buckets.last().unwrap().end, 2048);
        assert!(buckets
            .windows(2)
            .all(|w| w[0].end == w[1].start && w[0].start < w[0].end));
        assert_eq!(s.extent(), Some((0.0, 7.0)));
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        let x = [0.0; 10];
        assert!(decimate(&x, 5..5, 100).is_err());
        assert!(decimate(&x, 0..11, 100).is_err());
        let req = WindowRequest {
            start: 0,
            end: 10,
            max_points: 99,
        };
        assert!(req.validate(10).is_err());
    }

    #[test]
    fn balanced_phases_cancel() {
        let t: Vec<f64> = (0..256).map(|i| f64::from(i) * 0.05).collect();
        let ph = |k: f64| -> Vec<f64> {
            t.iter()
                .map(|x| libm::sin(x + k * 2.0 * core::f64::consts::PI / 3.0))
                .collect()
        };
        let z = zero_sequence(&ph(0.0), &ph(1.0), &ph(2.0)).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn overlay_list_parses() {
        let o = Overlays::parse("trend, zero").unwrap();
        assert!(o.trend && o.zero && !o.residual && !o.anomaly);
        assert!(Overlays::parse("bogus").is_err());
        assert_eq!(runs(&[false, true, true, false, true], 0..5), [(1, 3), (4, 5)]);
        assert_eq!(runs(&[true, true, true], 1..2), [(1, 2)]);
    }
}
