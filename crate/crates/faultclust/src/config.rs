//! Pipeline configuration, stored as TOML.
//!
//! ```toml
//! input = "data/dataset.json"
//! labels = "data/labels.csv"
//! output_dir = "runs/example"
//! seed = 42
//! workers = 0            # 0 = one per core
//!
//! [features]
//! normalize_input = true
//! fft_length = "pad-pow2"
//!
//! [reduction]
//! mode = "pca-then-tsne"
//!
//! [reduction.tsne]
//! perplexity = 30.0
//!
//! [clustering]
//! k = 15
//!
//! [metrics]
//! level = "event-type"
//! silhouette_space = "embedding"
//! ```
//!
//! Every section and key except `input` and `output_dir` is optional. The
//! single top-level `seed` drives both t-SNE initialization and K-Means
//! seeding.

use std::fs;
use std::path::{Path, PathBuf};

use faultclust_core::kmeans::{Init, KMeansParams, DEFAULT_K};
use faultclust_core::labels::LabelLevel;
use faultclust_core::pca::DEFAULT_VARIANCE_TARGET;
use faultclust_core::reduce::{ReductionMode, ReductionParams};
use faultclust_core::spectral::{FeatureConfig, FftLength};
use faultclust_core::tsne::TsneConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Dataset manifest (`.json`, blob alongside).
    pub input: PathBuf,
    /// Label CSV or `.jsonl` label log; metrics are skipped without it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Feature-extraction threads; 0 uses one per core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub reduction: ReductionSection,
    #[serde(default)]
    pub clustering: ClusteringSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub normalize_input: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncate: Option<usize>,
    pub fft_length: FftLength,
}

impl Default for FeatureSection {
    fn default() -> Self {
        let d = FeatureConfig::default();
        Self {
            normalize_input: d.normalize_input,
            truncate: d.truncate,
            fft_length: d.fft_length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionSection {
    pub mode: ReductionMode,
    pub variance_target: f64,
    pub tsne_pca_components: usize,
    pub tsne: TsneSection,
}

impl Default for ReductionSection {
    fn default() -> Self {
        let d = ReductionParams::default();
        Self {
            mode: ReductionMode::default(),
            variance_target: DEFAULT_VARIANCE_TARGET,
            tsne_pca_components: d.tsne_pca_components,
            tsne: TsneSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneSection {
    pub out_dims: usize,
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
}

impl Default for TsneSection {
    fn default() -> Self {
        let d = TsneConfig::default();
        Self {
            out_dims: d.out_dims,
            perplexity: d.perplexity,
            iterations: d.iterations,
            learning_rate: d.learning_rate,
            early_exaggeration: d.early_exaggeration,
            exaggeration_iters: d.exaggeration_iters,
            initial_momentum: d.initial_momentum,
            final_momentum: d.final_momentum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringSection {
    pub k: usize,
    pub init: Init,
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClusteringSection {
    fn default() -> Self {
        let d = KMeansParams::default();
        Self {
            k: DEFAULT_K,
            init: d.init,
            n_init: d.n_init,
            max_iter: d.max_iter,
            tol: d.tol,
        }
    }
}

/// Space in which silhouettes are measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SilhouetteSpace {
    /// The coordinates K-Means clustered (t-SNE map or PCA scores).
    #[default]
    Embedding,
    /// The full spectral feature vectors.
    Features,
}

impl SilhouetteSpace {
    pub fn as_str(self) -> &'static str {
        match self {
            SilhouetteSpace::Embedding => "embedding",
            SilhouetteSpace::Features => "features",
        }
    }
}

impl std::str::FromStr for SilhouetteSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(SilhouetteSpace::Embedding),
            "features" => Ok(SilhouetteSpace::Features),
            other => Err(Error::Config(format!(
                "unknown silhouette space {other:?} (expected embedding or features)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub level: LabelLevel,
    pub silhouette_space: SilhouetteSpace,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub mode: Option<ReductionMode>,
    pub k: Option<usize>,
}

impl PipelineConfig {
    /// Configuration with every optional value at its default.
    pub fn new(input: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            labels: None,
            output_dir: output_dir.into(),
            seed: 0,
            workers: 0,
            features: FeatureSection::default(),
            reduction: ReductionSection::default(),
            clustering: ClusteringSection::default(),
            metrics: MetricsSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.input {
            self.input = v.clone();
        }
        if let Some(v) = &o.labels {
            self.labels = Some(v.clone());
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if let Some(v) = o.mode {
            self.reduction.mode = v;
        }
        if let Some(v) = o.k {
            self.clustering.k = v;
        }
    }

    /// Range checks that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        let r = &self.reduction;
        if !(r.variance_target > 0.0 && r.variance_target <= 1.0) {
            return fail("reduction.variance_target must lie in (0, 1]");
        }
        if r.tsne_pca_components == 0 {
            return fail("reduction.tsne_pca_components must be positive");
        }
        let t = &r.tsne;
        if !(1..=3).contains(&t.out_dims) {
            return fail("reduction.tsne.out_dims must be 1, 2 or 3");
        }
        if !(t.perplexity > 0.0) || t.iterations == 0 || !(t.learning_rate > 0.0) || !(t.early_exaggeration >= 1.0) {
            return fail(
                "reduction.tsne needs perplexity > 0, iterations > 0, learning_rate > 0, early_exaggeration >= 1",
            );
        }
        if !(0.0..1.0).contains(&t.initial_momentum) || !(0.0..1.0).contains(&t.final_momentum) {
            return fail("reduction.tsne momenta must lie in [0, 1)");
        }
        let c = &self.clustering;
        if c.k == 0 || c.n_init == 0 || c.max_iter == 0 || !(c.tol >= 0.0) {
            return fail("clustering needs k > 0, n_init > 0, max_iter > 0, tol >= 0");
        }
        if self.features.truncate == Some(0) {
            return fail("features.truncate must be positive");
        }
        Ok(())
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            normalize_input: self.features.normalize_input,
            truncate: self.features.truncate,
            fft_length: self.features.fft_length,
        }
    }

    pub fn reduction_params(&self) -> ReductionParams {
        let r = &self.reduction;
        let t = &r.tsne;
        ReductionParams {
            variance_target: r.variance_target,
            tsne_pca_components: r.tsne_pca_components,
            tsne: TsneConfig {
                out_dims: t.out_dims,
                perplexity: t.perplexity,
                iterations: t.iterations,
                learning_rate: t.learning_rate,
                early_exaggeration: t.early_exaggeration,
                exaggeration_iters: t.exaggeration_iters,
                initial_momentum: t.initial_momentum,
                final_momentum: t.final_momentum,
                seed: self.seed,
            },
        }
    }

    pub fn kmeans_params(&self) -> KMeansParams {
        let c = &self.clustering;
        KMeansParams {
            k: c.k,
            init: c.init,
            n_init: c.n_init,
            max_iter: c.max_iter,
            tol: c.tol,
            seed: self.seed,
        }
    }
}
