//! Stage functions and the end-to-end `run` driver.
//!
//! A run writes every artifact into a sibling staging directory and moves
//! the files into `output_dir` only after all stages succeed; on failure the
//! staging directory is removed and the error names the failing stage.
//!
//! Artifacts of a run:
//!
//! | file | content |
//! |------|---------|
//! | `features.csv` | `record_id,f0..` normalized spectra |
//! | `embedding.csv` | `record_id,x,y[,z]` (t-SNE) or `record_id,pc1..` (PCA) |
//! | `kl_trace.csv` | KL per t-SNE iteration (t-SNE runs only) |
//! | `assignments.csv` | `record_id,cluster` |
//! | `model.json` | centroids, sizes, inertia and seed |
//! | `cluster_sizes.csv` | clusters by decreasing size |
//! | `metrics.json`, `metrics.md`, `contingency*.csv` | when labels are given |
//! | `run_manifest.json` | effective config, seed, SHA-256 of inputs and outputs |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use faultclust_core::kmeans::{kmeans_fit, ClusterModel, KMeansParams};
use faultclust_core::labels::{LabelLevel, LabelRecord};
use faultclust_core::metrics::{cluster_size_table, contingency, evaluate, ContingencyTable, MetricReport};
use faultclust_core::reduce::{reduce_for_clustering, Reduction, ReductionMode, ReductionParams};
use faultclust_core::spectral::{record_features, FeatureConfig, FeatureMatrix};
use faultclust_core::waveform::Dataset;
use faultclust_core::Matrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{MetricsSection, PipelineConfig, SilhouetteSpace};
use crate::csvio::{self, EmbeddingHeader};
use crate::error::{Error, Result, StageContext};
use crate::labelstore::load_labels;
use crate::store::{blob_path, load_dataset};

pub const SCHEMA_VERSION: u32 = 1;

pub const FEATURES_FILE: &str = "features.csv";
pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const KL_TRACE_FILE: &str = "kl_trace.csv";
pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const MODEL_FILE: &str = "model.json";
pub const SIZES_FILE: &str = "cluster_sizes.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const METRICS_MD_FILE: &str = "metrics.md";
pub const CONTINGENCY_FILE: &str = "contingency.csv";
pub const CONTINGENCY_PERCENT_FILE: &str = "contingency_percent.csv";
pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Feature matrix for a dataset, computed on `workers` threads (0 = one
/// per core). Row order always follows record order.
pub fn extract_features(ds: &Dataset, cfg: &FeatureConfig, workers: usize) -> Result<FeatureMatrix> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} worker threads: {e}")))?;
    let rows = pool.install(|| {
        ds.records
            .par_iter()
            .map(|r| record_features(r, &ds.meta, cfg))
            .collect::<faultclust_core::Result<Vec<_>>>()
    })?;
    let fft_len = cfg.fft_len(ds.meta.timesteps);
    Ok(FeatureMatrix::from_rows(
        ds.ids(),
        rows,
        fft_len,
        ds.meta.sampling_rate_hz / fft_len as f64,
    )?)
}

pub fn reduce(features: &Matrix, mode: ReductionMode, params: &ReductionParams) -> Result<Reduction> {
    Ok(reduce_for_clustering(features, mode, params)?)
}

pub fn cluster(points: &Matrix, params: &KMeansParams) -> Result<ClusterModel> {
    Ok(kmeans_fit(points, params)?)
}

pub fn embedding_header(mode: ReductionMode) -> EmbeddingHeader {
    match mode {
        ReductionMode::Pca => EmbeddingHeader::Components,
        ReductionMode::PcaThenTsne => EmbeddingHeader::Map,
    }
}

/// Persisted clustering model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub k: usize,
    pub seed: u64,
    pub inertia: f64,
    pub iterations_run: usize,
    pub sizes: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia_trace: Vec<f64>,
}

impl ModelFile {
    pub fn from_model(m: &ClusterModel) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            k: m.k,
            seed: m.seed,
            inertia: m.inertia,
            iterations_run: m.iterations_run,
            sizes: m.sizes.clone(),
            centroids: m.centroids.iter_rows().map(<[f64]>::to_vec).collect(),
            inertia_trace: m.inertia_trace.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

/// Writes `assignments.csv`, `model.json` and `cluster_sizes.csv`.
pub fn write_cluster_outputs(dir: &Path, ids: &[u64], model: &ClusterModel) -> Result<()> {
    csvio::write_assignments(dir.join(ASSIGNMENTS_FILE), ids, &model.assignments)?;
    ModelFile::from_model(model).save(dir.join(MODEL_FILE))?;
    csvio::write_cluster_sizes(dir.join(SIZES_FILE), &cluster_size_table(&model.assignments))
}

/// `metrics.json` body: the aggregate report plus its contingency table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub schema_version: u32,
    #[serde(flatten)]
    pub report: MetricReport,
    pub contingency: ContingencyTable,
}

impl MetricsDocument {
    /// Canonical serialization shared by the CLI and the HTTP service.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::json(METRICS_FILE, e))?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_markdown(&self) -> String {
        let r = &self.report;
        let level = match r.level {
            LabelLevel::EventType => "event type",
            LabelLevel::FaultClass => "fault class",
        };
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let mut md = format!(
            "# Cluster metrics\n\nLabel level: {level}. Labeled samples: {}. Categories: {}.\n\n",
            r.labeled_samples, r.categories
        );
        md += "| cluster | labeled | purity | entropy | silhouette |\n|---:|---:|---:|---:|---:|\n";
        for c in &r.per_cluster {
            md += &format!(
                "| {} | {} | {:.3} | {:.3} | {} |\n",
                c.cluster,
                c.count,
                c.purity,
                c.entropy,
                opt(c.silhouette)
            );
        }
        md += "\n| metric | raw mean | raw std | weighted mean | weighted std |\n|---|---:|---:|---:|---:|\n";
        let mut rows = vec![("purity", &r.purity), ("entropy", &r.entropy)];
        if let Some(s) = &r.silhouette {
            rows.push(("silhouette", s));
        }
        for (name, s) in rows {
            md += &format!(
                "| {name} | {:.3} | {:.3} | {:.3} | {:.3} |\n",
                s.raw.mean, s.raw.std, s.weighted.mean, s.weighted.std
            );
        }
        md += &format!(
            "\nGlobal purity {:.3}, conditional entropy {:.3} bits, silhouette {}",
            r.global.purity,
            r.global.entropy,
            opt(r.global.silhouette)
        );
        if let Some(space) = &r.silhouette_space {
            md += &format!(" (measured in {space} space)");
        }
        md += &format!(".\n\nWeighting: {}.\n", r.weighting);
        md
    }
}

/// Evaluates the clustering stored in `run_dir` against `labels`.
pub fn evaluate_run(run_dir: &Path, labels: &[LabelRecord], metrics: &MetricsSection) -> Result<MetricsDocument> {
    if labels.is_empty() {
        return Err(Error::Config("no labels to evaluate against".into()));
    }
    let model = ModelFile::load(run_dir.join(MODEL_FILE))?;
    let (ids, clusters) = csvio::read_assignments(run_dir.join(ASSIGNMENTS_FILE))?;
    let points_file = match metrics.silhouette_space {
        SilhouetteSpace::Embedding => EMBEDDING_FILE,
        SilhouetteSpace::Features => FEATURES_FILE,
    };
    let (point_ids, points) = csvio::read_features(run_dir.join(points_file))?;
    if point_ids != ids {
        return Err(Error::malformed(
            run_dir.join(points_file),
            format!("record ids differ from {ASSIGNMENTS_FILE}"),
        ));
    }
    evaluate_assignments(&ids, &clusters, model.k, &points, labels, metrics)
}

/// Evaluates in-memory assignments; `points` are in `metrics.silhouette_space`.
pub fn evaluate_assignments(
    ids: &[u64],
    clusters: &[usize],
    k: usize,
    points: &Matrix,
    labels: &[LabelRecord],
    metrics: &MetricsSection,
) -> Result<MetricsDocument> {
    let mut report = evaluate(ids, clusters, k, Some(points), labels, metrics.level)?;
    if report.silhouette.is_some() {
        report.silhouette_space = Some(metrics.silhouette_space.as_str().to_string());
    }
    let contingency = contingency(ids, clusters, k, labels, metrics.level)?;
    Ok(MetricsDocument {
        schema_version: SCHEMA_VERSION,
        report,
        contingency,
    })
}

/// Writes `metrics.json`, `metrics.md` and both contingency CSVs.
pub fn write_metrics(dir: &Path, doc: &MetricsDocument) -> Result<()> {
    csvio::write_text(dir.join(METRICS_FILE), &doc.to_json()?)?;
    csvio::write_text(dir.join(METRICS_MD_FILE), &doc.to_markdown())?;
    csvio::write_contingency(
        dir.join(CONTINGENCY_FILE),
        dir.join(CONTINGENCY_PERCENT_FILE),
        &doc.contingency,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    /// Milliseconds since the Unix epoch at completion.
    pub created_unix_ms: u64,
    pub seed: u64,
    pub config: PipelineConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Wall time per stage in milliseconds.
    pub stage_ms: BTreeMap<String, u64>,
}

/// What a completed run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub records: usize,
    pub feature_dims: usize,
    pub embedding_dims: usize,
    pub model: ClusterModel,
    pub final_kl: Option<f64>,
    pub metrics: Option<MetricsDocument>,
    pub stage_ms: BTreeMap<String, u64>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Runs every stage and commits the artifacts to `cfg.output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let mut timer = StageTimer::start();

    let ds = load_dataset(&cfg.input).stage("load")?;
    let labels = cfg.labels.as_ref().map(load_labels).transpose().stage("labels")?;
    timer.lap("load");

    let features = extract_features(&ds, &cfg.feature_config(), cfg.workers).stage("features")?;
    timer.lap("features");
    let reduction = reduce(&features.values, cfg.reduction.mode, &cfg.reduction_params()).stage("reduce")?;
    timer.lap("reduce");
    let model = cluster(&reduction.embedding.coords, &cfg.kmeans_params()).stage("cluster")?;
    timer.lap("cluster");

    let staging = staging_dir(&cfg.output_dir);
    let _ = fs::remove_dir_all(&staging);
    fs::create_dir_all(&staging)
        .map_err(|e| Error::io(&staging, e))
        .stage("write")?;
    let guard = StagingGuard(Some(staging.clone()));

    let ids = &features.ids;
    let coords = &reduction.embedding.coords;
    (|| -> Result<()> {
        csvio::write_features(staging.join(FEATURES_FILE), ids, &features.values)?;
        csvio::write_embedding(
            staging.join(EMBEDDING_FILE),
            ids,
            coords,
            embedding_header(cfg.reduction.mode),
        )?;
        if cfg.reduction.mode == ReductionMode::PcaThenTsne {
            csvio::write_kl_trace(staging.join(KL_TRACE_FILE), &reduction.embedding.kl_trace)?;
        }
        write_cluster_outputs(&staging, ids, &model)
    })()
    .stage("write")?;
    timer.lap("write");

    let metrics = match &labels {
        Some(labels) => {
            let points = match cfg.metrics.silhouette_space {
                SilhouetteSpace::Embedding => coords,
                SilhouetteSpace::Features => &features.values,
            };
            let doc = evaluate_assignments(ids, &model.assignments, model.k, points, labels, &cfg.metrics)
                .and_then(|doc| write_metrics(&staging, &doc).map(|()| doc))
                .stage("evaluate")?;
            timer.lap("evaluate");
            Some(doc)
        }
        None => None,
    };

    (|| -> Result<()> {
        let mut inputs = vec![cfg.input.clone(), blob_path(&cfg.input)];
        inputs.extend(cfg.labels.clone());
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64),
            seed: cfg.seed,
            config: cfg.clone(),
            inputs: inputs
                .iter()
                .map(|p| {
                    Ok(FileDigest {
                        path: p.display().to_string(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect::<Result<_>>()?,
            outputs: sorted_files(&staging)?
                .into_iter()
                .map(|name| {
                    Ok(FileDigest {
                        sha256: sha256_file(&staging.join(&name))?,
                        path: name,
                    })
                })
                .collect::<Result<_>>()?,
            stage_ms: timer.laps.clone(),
        };
        write_json(&staging.join(MANIFEST_FILE), &manifest)?;
        commit(&staging, &cfg.output_dir)
    })()
    .stage("commit")?;
    drop(guard);

    Ok(RunSummary {
        output_dir: cfg.output_dir.clone(),
        records: ds.len(),
        feature_dims: features.values.cols(),
        embedding_dims: coords.cols(),
        final_kl: reduction.embedding.final_kl,
        model,
        metrics,
        stage_ms: timer.laps,
    })
}

fn staging_dir(output_dir: &Path) -> PathBuf {
    let name = output_dir
        .file_name()
        .map_or_else(|| "run".into(), |n| n.to_string_lossy().into_owned());
    output_dir.with_file_name(format!(".{name}.staging-{}", std::process::id()))
}

/// Removes the staging directory unless the run got as far as committing.
struct StagingGuard(Option<PathBuf>);

impl Drop for StagingGuard {
    fn drop(&mut self) {
        if let Some(dir) = self.0.take() {
            let _ = fs::remove_dir_all(dir);
        }
    }
}

fn sorted_files(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        names.push(entry.file_name().to_string_lossy().into_owned());
    }
    names.sort();
    Ok(names)
}

fn commit(staging: &Path, output_dir: &Path) -> Result<()> {
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    for name in sorted_files(staging)? {
        let to = output_dir.join(&name);
        fs::rename(staging.join(&name), &to).map_err(|e| Error::io(&to, e))?;
    }
    Ok(())
}

struct StageTimer {
    last: Instant,
    laps: BTreeMap<String, u64>,
}

impl StageTimer {
    fn start() -> Self {
        Self {
            last: Instant::now(),
            laps: BTreeMap::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.laps
            .insert(stage.to_string(), now.duration_since(self.last).as_millis() as u64);
        self.last = now;
    }
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    csvio::write_text(path, &text)
}
