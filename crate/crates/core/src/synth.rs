//! Labeled synthetic fault recordings.
//!
//! Every record starts from a balanced 3-phase system: voltages
//! `A sin(wt + phi - m*2pi/3)` and currents lagging them by a fixed power
//! factor angle. A fault window `[inception, inception + duration)` then
//! modifies channels according to the [`EventType`]:
//!
//! - short circuits: faulted phase voltages scaled by `1 - severity`, their
//!   currents by `1 + 9 severity` plus a decaying DC offset (time constant
//!   [`DC_OFFSET_TAU_S`]);
//! - switching: currents are zero before (switch on) or from (switch off)
//!   the inception sample; the duration is not used;
//! - transient: a damped oscillation well above the fundamental is added to
//!   all channels;
//! - open circuit: the phase-B current reads exactly zero inside the window.
//!
//! Gaussian noise with standard deviation `noise_std` times each channel's
//! nominal amplitude is added everywhere except on an open conductor, and
//! values are clamped to the 16-bit quantizer range. All math goes through
//! `libm` and [`SplitMix64`], so a fixed seed gives bit-identical output on
//! every platform.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{FaultClass, LabelRecord, Phase};
use crate::rng::{derive_seed, SplitMix64};
use crate::waveform::{Channel, Dataset, DatasetMeta, WaveformRecord, CHANNELS, RAW_COUNT_LIMIT};

/// Nominal voltage amplitude in quantizer counts.
pub const VOLTAGE_AMPLITUDE: f64 = 5000.0;
/// Nominal current amplitude in quantizer counts.
pub const CURRENT_AMPLITUDE: f64 = 1000.0;
/// Current lag behind voltage (radians, about 0.87 power factor).
pub const CURRENT_LAG: f64 = PI / 6.0;
/// Decay constant of the short-circuit DC offset, in seconds.
pub const DC_OFFSET_TAU_S: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventType {
    Normal,
    #[serde(rename = "SC-1P-A")]
    Sc1pA,
    #[serde(rename = "SC-1P-B")]
    Sc1pB,
    #[serde(rename = "SC-1P-C")]
    Sc1pC,
    /// Line-to-line fault between phases A and B.
    #[serde(rename = "SC-LL")]
    ScLl,
    /// Double line-to-ground fault on phases A and B.
    #[serde(rename = "SC-DLG")]
    ScDlg,
    #[serde(rename = "SC-3PH")]
    Sc3ph,
    SwitchOn,
    SwitchOff,
    Transient,
    /// Open conductor on phase B.
    OpenCircuit,
}

impl EventType {
    pub const ALL: [EventType; 11] = [
        EventType::Normal,
        EventType::Sc1pA,
        EventType::Sc1pB,
        EventType::Sc1pC,
        EventType::ScLl,
        EventType::ScDlg,
        EventType::Sc3ph,
        EventType::SwitchOn,
        EventType::SwitchOff,
        EventType::Transient,
        EventType::OpenCircuit,
    ];

    /// Eight classes with pairwise distinct label fault types, used for
    /// end-to-end clustering checks.
    pub const BENCHMARK: [EventType; 8] = [
        EventType::Normal,
        EventType::Sc1pA,
        EventType::ScLl,
        EventType::Sc3ph,
        EventType::SwitchOn,
        EventType::SwitchOff,
        EventType::Transient,
        EventType::OpenCircuit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Normal => "Normal",
            EventType::Sc1pA => "SC-1P-A",
            EventType::Sc1pB => "SC-1P-B",
            EventType::Sc1pC => "SC-1P-C",
            EventType::ScLl => "SC-LL",
            EventType::ScDlg => "SC-DLG",
            EventType::Sc3ph => "SC-3PH",
            EventType::SwitchOn => "SwitchOn",
            EventType::SwitchOff => "SwitchOff",
            EventType::Transient => "Transient",
            EventType::OpenCircuit => "OpenCircuit",
        }
    }

    /// Ground-truth label fields: class, fault type and phase.
    pub fn label(self) -> (FaultClass, &'static str, Phase) {
        use EventType::*;
        match self {
            Normal => (FaultClass::Normal, "Normal", Phase::NotApplicable),
            Sc1pA => (FaultClass::ShortCircuit, "1-P-SC", Phase::A),
            Sc1pB => (FaultClass::ShortCircuit, "1-P-SC", Phase::B),
            Sc1pC => (FaultClass::ShortCircuit, "1-P-SC", Phase::C),
            ScLl => (FaultClass::ShortCircuit, "2-P-SC", Phase::Multi),
            ScDlg => (FaultClass::ShortCircuit, "2-P-G-SC", Phase::Multi),
            Sc3ph => (FaultClass::ShortCircuit, "3-P-SC", Phase::Multi),
            SwitchOn => (FaultClass::Switching, "Switch On", Phase::NotApplicable),
            SwitchOff => (FaultClass::Switching, "Switch Off", Phase::NotApplicable),
            Transient => (FaultClass::Transients, "Transients", Phase::NotApplicable),
            OpenCircuit => (FaultClass::Other, "Open Circuit", Phase::B),
        }
    }

    /// Phase indices (0 = A) hit by a short circuit.
    fn faulted_phases(self) -> &'static [usize] {
        match self {
            EventType::Sc1pA => &[0],
            EventType::Sc1pB => &[1],
            EventType::Sc1pC => &[2],
            EventType::ScLl | EventType::ScDlg => &[0, 1],
            EventType::Sc3ph => &[0, 1, 2],
            _ => &[],
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventType::ALL
            .into_iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown event type {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub event_type: EventType,
    pub inception_sample: usize,
    pub duration_samples: usize,
    /// In `(0, 1]`.
    pub severity: f64,
    /// Noise standard deviation as a fraction of each channel's amplitude.
    pub noise_std: f64,
    pub seed: u64,
}

impl FaultSpec {
    pub fn validate(&self, timesteps: usize) -> Result<()> {
        if self.inception_sample + self.duration_samples > timesteps {
            return Err(Error::InvalidParameter(format!(
                "fault window {}+{} exceeds {timesteps} samples",
                self.inception_sample, self.duration_samples
            )));
        }
        if !(self.severity > 0.0 && self.severity <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "severity {} not in (0, 1]",
                self.severity
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise_std {} is negative",
                self.noise_std
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> core::ops::Range<usize> {
        self.inception_sample..self.inception_sample + self.duration_samples
    }
}

/// Generates one record with the given id and its ground-truth label.
pub fn generate(spec: &FaultSpec, meta: &DatasetMeta, id: u64) -> Result<(WaveformRecord, LabelRecord)> {
    meta.validate()?;
    let n = meta.timesteps;
    spec.validate(n)?;
    let mut rng = SplitMix64::new(spec.seed);
    let fs = meta.sampling_rate_hz;
    let omega = 2.0 * PI * meta.nominal_freq_hz / fs;
    let phi0 = rng.uniform(0.0, 2.0 * PI);
    let v_amp = VOLTAGE_AMPLITUDE * rng.uniform(0.95, 1.05);
    let i_amp = CURRENT_AMPLITUDE * rng.uniform(0.9, 1.1);
    let shift = |m: usize| phi0 - m as f64 * 2.0 * PI / 3.0;

    let mut ch: Vec<Vec<f64>> = vec![vec![0.0; n]; CHANNELS];
    for m in 0..3 {
        for t in 0..n {
            let wt = omega * t as f64 + shift(m);
            ch[m][t] = v_amp * libm::sin(wt);
            ch[3 + m][t] = i_amp * libm::sin(wt - CURRENT_LAG);
        }
    }

    let window = spec.window();
    let s = spec.severity;
    let mut open_conductor: Option<(usize, core::ops::Range<usize>)> = None;
    match spec.event_type {
        EventType::Normal => {}
        e @ (EventType::Sc1pA
        | EventType::Sc1pB
        | EventType::Sc1pC
        | EventType::ScLl
        | EventType::ScDlg
        | EventType::Sc3ph) => {
            let tau = DC_OFFSET_TAU_S * fs;
            let gain = 1.0 + 9.0 * s;
            for &m in e.faulted_phases() {
                // Offset that cancels the instantaneous AC step at inception.
                let wt0 = omega * window.start as f64 + shift(m) - CURRENT_LAG;
                let offset = -i_amp * (gain - 1.0) * libm::sin(wt0);
                for t in window.clone() {
                    ch[m][t] *= 1.0 - s;
                    let decay = libm::exp(-((t - window.start) as f64) / tau);
                    ch[3 + m][t] = ch[3 + m][t] * gain + offset * decay;
                }
            }
            if e == EventType::ScLl {
                // No ground path: the two fault currents are equal and opposite.
                for t in window.clone() {
                    let i_ab = 0.5 * (ch[3][t] - ch[4][t]);
                    ch[3][t] = i_ab;
                    ch[4][t] = -i_ab;
                }
            }
        }
        EventType::SwitchOn => {
            for m in 3..6 {
                ch[m][..window.start].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        EventType::SwitchOff => {
            for m in 3..6 {
                ch[m][window.start..].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        EventType::Transient => {
            let f = meta.nominal_freq_hz * rng.uniform(16.0, 24.0);
            let f = f.min(0.45 * fs);
            let w = 2.0 * PI * f / fs;
            let tau = (spec.duration_samples as f64 / 4.0).max(1.0);
            let phase = rng.uniform(0.0, 2.0 * PI);
            for m in 0..CHANNELS {
                let amp = 0.5 * s * if m < 3 { v_amp } else { i_amp };
                for t in window.clone() {
                    let dt = (t - window.start) as f64;
                    ch[m][t] += amp * libm::exp(-dt / tau) * libm::sin(w * dt + phase + m as f64);
                }
            }
        }
        EventType::OpenCircuit => open_conductor = Some((Channel::I2.index(), window.clone())),
    }

    if spec.noise_std > 0.0 {
        for (m, c) in ch.iter_mut().enumerate() {
            let sigma = spec.noise_std * if m < 3 { v_amp } else { i_amp };
            c.iter_mut().for_each(|v| *v += sigma * rng.normal());
        }
    }
    if let Some((m, range)) = open_conductor {
        ch[m][range].iter_mut().for_each(|v| *v = 0.0);
    }

    let channels: Vec<Vec<f32>> = ch
        .into_iter()
        .map(|c| {
            c.into_iter()
                .map(|v| v.clamp(-f64::from(RAW_COUNT_LIMIT), f64::from(RAW_COUNT_LIMIT)) as f32)
                .collect()
        })
        .collect();
    let record = WaveformRecord::from_channels(id, &channels)?;
    let (class, fault_type, phase) = spec.event_type.label();
    Ok((record, LabelRecord::new(id, class, fault_type, phase)))
}

/// Randomization ranges for [`generate_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    pub noise_std: f64,
    pub severity_min: f64,
    pub severity_max: f64,
    /// Inception drawn uniformly from this fraction range of the record.
    pub inception_frac: (f64, f64),
    /// Fault duration drawn uniformly from this fraction range of the record.
    pub duration_frac: (f64, f64),
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            noise_std: 0.02,
            severity_min: 0.5,
            severity_max: 0.95,
            inception_frac: (0.25, 0.4),
            duration_frac: (0.1, 0.2),
        }
    }
}

impl SynthOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.noise_std >= 0.0
            && 0.0 < self.severity_min
            && self.severity_min <= self.severity_max
            && self.severity_max <= 1.0
            && 0.0 <= self.inception_frac.0
            && self.inception_frac.0 <= self.inception_frac.1
            && 0.0 <= self.duration_frac.0
            && self.duration_frac.0 <= self.duration_frac.1
            && self.inception_frac.1 + self.duration_frac.1 <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "inconsistent synthetic options {self:?}"
            )))
        }
    }
}

/// Draws the `index`-th spec of a dataset.
pub fn draw_spec(event_type: EventType, timesteps: usize, seed: u64, index: u64, opts: &SynthOptions) -> FaultSpec {
    let mut rng = SplitMix64::new(derive_seed(seed, index));
    let n = timesteps as f64;
    let inception = libm::floor(n * rng.uniform(opts.inception_frac.0, opts.inception_frac.1)) as usize;
    let duration = libm::floor(n * rng.uniform(opts.duration_frac.0, opts.duration_frac.1)) as usize;
    let duration = duration.min(timesteps - inception.min(timesteps));
    FaultSpec {
        event_type,
        inception_sample: inception.min(timesteps),
        duration_samples: duration,
        severity: rng.uniform(opts.severity_min, opts.severity_max),
        noise_std: opts.noise_std,
        seed: rng.next_u64(),
    }
}

/// Generates `class_counts[e]` records of each event type, shuffled
/// deterministically. Record ids are the final positions `0..N`.
pub fn generate_dataset(
    class_counts: &BTreeMap<EventType, usize>,
    timesteps: usize,
    seed: u64,
    opts: &SynthOptions,
) -> Result<(Dataset, Vec<LabelRecord>)> {
    opts.validate()?;
    let total: usize = class_counts.values().sum();
    if total == 0 {
        return Err(Error::Empty("class counts"));
    }
    let meta = DatasetMeta::new(total, timesteps);
    meta.validate()?;

    let mut specs = Vec::with_capacity(total);
    for (&event, &count) in class_counts {
        for _ in 0..count {
            let index = specs.len() as u64;
            specs.push(draw_spec(event, timesteps, seed, index, opts));
        }
    }
    SplitMix64::new(derive_seed(seed, u64::MAX)).shuffle(&mut specs);

    let mut records = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for (id, spec) in specs.iter().enumerate() {
        let (r, l) = generate(spec, &meta, id as u64)?;
        records.push(r);
        labels.push(l);
    }
    Ok((Dataset::new(meta, records)?, labels))
}

/// `count` records of every benchmark class.
pub fn benchmark_counts(count: usize) -> BTreeMap<EventType, usize> {
    EventType::BENCHMARK.into_iter().map(|e| (e, count)).collect()
}

/// Parses `"Normal=3,SC-1P-A=5"` into a class-count map.
pub fn parse_class_counts(s: &str) -> Result<BTreeMap<EventType, usize>> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, count) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("expected NAME=COUNT, got {part:?}")))?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad count in {part:?}")))?;
        *out.entry(name.parse::<EventType>()?).or_insert(0) += count;
    }
    Ok(out)
}

/// Human-readable summary of a class-count map.
pub fn describe_counts(counts: &BTreeMap<EventType, usize>) -> String {
    let parts: Vec<String> = counts.iter().map(|(e, c)| format!("{e}={c}")).collect();
    parts.join(",")
}
