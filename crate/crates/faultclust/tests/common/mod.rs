//! Shared fixtures: small synthetic datasets and fast pipeline configs.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use faultclust::config::PipelineConfig;
use faultclust::core::labels::LabelRecord;
use faultclust::core::reduce::ReductionMode;
use faultclust::core::synth::{benchmark_counts, generate_dataset, SynthOptions};
use faultclust::core::waveform::Dataset;
use faultclust::{csvio, store};

/// Benchmark classes, `per_class` records each, written under `dir`.
/// Returns (manifest path, label CSV path).
pub fn write_synthetic(dir: &Path, per_class: usize, timesteps: usize, seed: u64) -> (PathBuf, PathBuf) {
    let (ds, labels) = synthetic(per_class, timesteps, seed);
    let manifest = dir.join("data").join("dataset.json");
    let labels_path = dir.join("data").join("labels.csv");
    store::save_dataset(&ds, &manifest).unwrap();
    csvio::write_labels_csv(&labels_path, &labels).unwrap();
    (manifest, labels_path)
}

pub fn synthetic(per_class: usize, timesteps: usize, seed: u64) -> (Dataset, Vec<LabelRecord>) {
    generate_dataset(&benchmark_counts(per_class), timesteps, seed, &SynthOptions::default()).unwrap()
}

/// A configuration that runs in well under a second on ~100 records.
pub fn fast_config(input: &Path, labels: Option<&Path>, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(input, out);
    cfg.labels = labels.map(Path::to_path_buf);
    cfg.seed = 7;
    cfg.workers = 2;
    cfg.reduction.mode = ReductionMode::PcaThenTsne;
    cfg.reduction.tsne.perplexity = 10.0;
    cfg.reduction.tsne.iterations = 400;
    cfg.clustering.k = 8;
    cfg
}
