//! Fault-recording data model.
//!
//! A [`Dataset`] holds equally long 6-channel records. Samples are stored as
//! `f32` in channel-major, time-minor order, the same layout the on-disk blob
//! uses, so a save/load round trip is bit-exact. Values are kept as supplied
//! (raw quantizer counts or engineering units); min/max normalization later
//! in the pipeline makes absolute scale irrelevant.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 6;

/// Largest magnitude a 16-bit quantized sample can take.
pub const RAW_COUNT_LIMIT: f32 = 32767.0;

pub const DEFAULT_SAMPLING_RATE_HZ: f64 = 6400.0;
pub const DEFAULT_NOMINAL_FREQ_HZ: f64 = 50.0;
pub const DEFAULT_VOLTAGE_STEP_V: f64 = 18.310;
pub const DEFAULT_CURRENT_STEP_A: f64 = 4.314;

/// Channel order inside every record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    V1,
    V2,
    V3,
    I1,
    I2,
    I3,
}

impl Channel {
    pub const ALL: [Channel; CHANNELS] = [
        Channel::V1,
        Channel::V2,
        Channel::V3,
        Channel::I1,
        Channel::I2,
        Channel::I3,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_voltage(self) -> bool {
        self.index() < 3
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::V1 => "V1",
            Channel::V2 => "V2",
            Channel::V3 => "V3",
            Channel::I1 => "I1",
            Channel::I2 => "I2",
            Channel::I3 => "I3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub record_count: usize,
    pub channels: usize,
    pub timesteps: usize,
    pub sampling_rate_hz: f64,
    pub nominal_freq_hz: f64,
    pub voltage_step_v: f64,
    pub current_step_a: f64,
}

impl DatasetMeta {
    /// Metadata with the default 6400 Hz / 50 Hz acquisition parameters.
    pub fn new(record_count: usize, timesteps: usize) -> Self {
        Self {
            record_count,
            channels: CHANNELS,
            timesteps,
            sampling_rate_hz: DEFAULT_SAMPLING_RATE_HZ,
            nominal_freq_hz: DEFAULT_NOMINAL_FREQ_HZ,
            voltage_step_v: DEFAULT_VOLTAGE_STEP_V,
            current_step_a: DEFAULT_CURRENT_STEP_A,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels != CHANNELS {
            return Err(Error::Shape(format!(
                "expected {CHANNELS} channels, got {}",
                self.channels
            )));
        }
        if self.timesteps == 0 {
            return Err(Error::InvalidParameter("timesteps must be positive".into()));
        }
        if !(self.nominal_freq_hz.is_finite() && self.nominal_freq_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "nominal frequency {} Hz is not positive",
                self.nominal_freq_hz
            )));
        }
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 2.0 * self.nominal_freq_hz) {
            return Err(Error::InvalidParameter(format!(
                "sampling rate {} Hz must exceed twice the nominal {} Hz",
                self.sampling_rate_hz, self.nominal_freq_hz
            )));
        }
        if self.period() < 2 {
            return Err(Error::InvalidParameter("decomposition period below 2".into()));
        }
        Ok(())
    }

    /// Samples per fundamental cycle: 128 at 6400 Hz / 50 Hz.
    pub fn period(&self) -> usize {
        libm::round(self.sampling_rate_hz / self.nominal_freq_hz) as usize
    }

    /// Number of `f32` values one record occupies.
    pub fn record_len(&self) -> usize {
        self.channels * self.timesteps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformRecord {
    pub id: u64,
    /// `CHANNELS * timesteps` values, channel-major.
    pub samples: Vec<f32>,
}

impl WaveformRecord {
    /// Builds a record from six equally long channel buffers.
    pub fn from_channels<C: AsRef<[f32]>>(id: u64, channels: &[C]) -> Result<Self> {
        if channels.len() != CHANNELS {
            return Err(Error::Shape(format!(
                "record {id}: expected {CHANNELS} channels, got {}",
                channels.len()
            )));
        }
        let t = channels[0].as_ref().len();
        let mut samples = Vec::with_capacity(CHANNELS * t);
        for ch in channels {
            let ch = ch.as_ref();
            if ch.len() != t {
                return Err(Error::Shape(format!("record {id}: ragged channels")));
            }
            samples.extend_from_slice(ch);
        }
        Ok(Self { id, samples })
    }

    pub fn timesteps(&self) -> usize {
        self.samples.len() / CHANNELS
    }

    pub fn channel(&self, ch: Channel) -> &[f32] {
        let t = self.timesteps();
        &self.samples[ch.index() * t..(ch.index() + 1) * t]
    }

    /// Channel widened to `f64`.
    pub fn channel_f64(&self, ch: Channel) -> Vec<f64> {
        self.channel(ch).iter().map(|&v| f64::from(v)).collect()
    }

    /// Whether every sample lies inside the 16-bit quantizer range.
    pub fn within_raw_range(&self) -> bool {
        self.samples.iter().all(|v| v.abs() <= RAW_COUNT_LIMIT)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<WaveformRecord>,
}

impl Dataset {
    /// Validates shape, id uniqueness and finiteness, and syncs
    /// `meta.record_count` with the record list.
    pub fn new(mut meta: DatasetMeta, records: Vec<WaveformRecord>) -> Result<Self> {
        meta.record_count = records.len();
        meta.validate()?;
        let expected = meta.record_len();
        let mut ids = BTreeSet::new();
        for r in &records {
            if r.samples.len() != expected {
                return Err(Error::Shape(format!(
                    "record {} has {} samples, expected {} x {}",
                    r.id,
                    r.samples.len(),
                    meta.channels,
                    meta.timesteps
                )));
            }
            if !ids.insert(r.id) {
                return Err(Error::Shape(format!("duplicate record id {}", r.id)));
            }
            if let Some(index) = r.samples.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "waveform sample",
                    index,
                });
            }
        }
        Ok(Self { meta, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.id).collect()
    }

    pub fn get(&self, id: u64) -> Option<&WaveformRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Same dataset with every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Dataset {
        let records = self
            .records
            .iter()
            .map(|r| WaveformRecord {
                id: r.id,
                samples: r.samples.iter().map(|v| v * factor).collect(),
            })
            .collect();
        Dataset {
            meta: self.meta.clone(),
            records,
        }
    }
}
