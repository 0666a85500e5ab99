//! Dataset files: a JSON manifest next to a little-endian `f32` blob.
//!
//! `dataset.json` holds the shape and acquisition parameters; `dataset.f32`
//! (same stem) holds every sample in record-major, channel-major, time-minor
//! order. Loading fails rather than truncating when the two disagree.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use faultclust_core::waveform::{
    Channel, Dataset, DatasetMeta, WaveformRecord, CHANNELS, DEFAULT_CURRENT_STEP_A, DEFAULT_VOLTAGE_STEP_V,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BLOB_EXTENSION: &str = "f32";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    record_count: usize,
    channels: usize,
    timesteps: usize,
    sampling_rate_hz: f64,
    nominal_freq_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    voltage_step_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    current_step_a: Option<f64>,
    /// Present only when ids are not simply `0..record_count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    record_ids: Option<Vec<u64>>,
}

/// Blob path belonging to a manifest path.
pub fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension(BLOB_EXTENSION)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    let blob = blob_path(path);
    let bytes = fs::read(&blob).map_err(|e| Error::io(&blob, e))?;

    let meta = DatasetMeta {
        record_count: m.record_count,
        channels: m.channels,
        timesteps: m.timesteps,
        sampling_rate_hz: m.sampling_rate_hz,
        nominal_freq_hz: m.nominal_freq_hz,
        voltage_step_v: m.voltage_step_v.unwrap_or(DEFAULT_VOLTAGE_STEP_V),
        current_step_a: m.current_step_a.unwrap_or(DEFAULT_CURRENT_STEP_A),
    };
    meta.validate()?;
    let per_record = meta.record_len();
    let expected = m.record_count * per_record * 4;
    if bytes.len() != expected {
        return Err(faultclust_core::Error::Shape(format!(
            "{} holds {} bytes, manifest implies {} x {} x {} x 4 = {expected}",
            blob.display(),
            bytes.len(),
            m.record_count,
            m.channels,
            m.timesteps
        ))
        .into());
    }
    let ids = match m.record_ids {
        Some(ids) if ids.len() != m.record_count => {
            return Err(faultclust_core::Error::Shape(format!(
                "{} record ids for {} records",
                ids.len(),
                m.record_count
            ))
            .into())
        }
        Some(ids) => ids,
        None => (0..m.record_count as u64).collect(),
    };
    let samples: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let records = ids
        .into_iter()
        .zip(samples.chunks_exact(per_record.max(1)))
        .map(|(id, s)| WaveformRecord {
            id,
            samples: s.to_vec(),
        })
        .collect();
    Ok(Dataset::new(meta, records)?)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let sequential = ds.records.iter().enumerate().all(|(i, r)| r.id == i as u64);
    let meta = &ds.meta;
    let m = Manifest {
        record_count: ds.records.len(),
        channels: meta.channels,
        timesteps: meta.timesteps,
        sampling_rate_hz: meta.sampling_rate_hz,
        nominal_freq_hz: meta.nominal_freq_hz,
        voltage_step_v: (meta.voltage_step_v != DEFAULT_VOLTAGE_STEP_V).then_some(meta.voltage_step_v),
        current_step_a: (meta.current_step_a != DEFAULT_CURRENT_STEP_A).then_some(meta.current_step_a),
        record_ids: (!sequential).then(|| ds.ids()),
    };
    let text = serde_json::to_string_pretty(&m).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;

    let blob = blob_path(path);
    let file = fs::File::create(&blob).map_err(|e| Error::io(&blob, e))?;
    let mut w = BufWriter::new(file);
    for r in &ds.records {
        for v in &r.samples {
            w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(&blob, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&blob, e))
}

/// Builds a dataset from a long-format CSV with header `id,channel,t,value`
/// (channel as `V1`..`I3` or `0`..`5`). Every (id, channel, t) cell must be
/// present exactly once.
pub fn import_csv(path: impl AsRef<Path>, mut meta: DatasetMeta) -> Result<Dataset> {
    let path = path.as_ref();
    #[derive(Deserialize)]
    struct Row {
        id: u64,
        channel: String,
        t: usize,
        value: f32,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut cells: std::collections::BTreeMap<u64, Vec<Option<f32>>> = Default::default();
    let mut timesteps = 0;
    let rows: Vec<Row> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::csv(path, e))?;
    for r in &rows {
        timesteps = timesteps.max(r.t + 1);
    }
    for r in rows {
        let ch = parse_channel(&r.channel)
            .ok_or_else(|| Error::malformed(path, format!("unknown channel {:?}", r.channel)))?;
        let slot = cells.entry(r.id).or_insert_with(|| vec![None; CHANNELS * timesteps]);
        let cell = &mut slot[ch.index() * timesteps + r.t];
        if cell.replace(r.value).is_some() {
            return Err(Error::malformed(
                path,
                format!("duplicate sample id={} channel={} t={}", r.id, ch.name(), r.t),
            ));
        }
    }
    let mut records = Vec::with_capacity(cells.len());
    for (id, slot) in cells {
        let samples = slot
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    Error::malformed(
                        path,
                        format!(
                            "record {id} misses channel {} t={}",
                            Channel::ALL[i / timesteps].name(),
                            i % timesteps
                        ),
                    )
                })
            })
            .collect::<Result<Vec<f32>>>()?;
        records.push(WaveformRecord { id, samples });
    }
    meta.timesteps = timesteps;
    Ok(Dataset::new(meta, records)?)
}

fn parse_channel(s: &str) -> Option<Channel> {
    let s = s.trim();
    Channel::ALL
        .into_iter()
        .find(|c| c.name().eq_ignore_ascii_case(s))
        .or_else(|| s.parse::<usize>().ok().and_then(|i| Channel::ALL.get(i).copied()))
}
