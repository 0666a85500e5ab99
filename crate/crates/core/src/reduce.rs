//! Feature-space reduction ahead of clustering.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::Matrix;
use crate::pca::{pca_fit, PcaModel, PcaTarget, DEFAULT_VARIANCE_TARGET};
use crate::tsne::{tsne_embed, Embedding, TsneConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionMode {
    /// PCA scores at the configured variance target.
    Pca,
    /// PCA to at most `tsne_pca_components` dimensions, then t-SNE.
    #[default]
    PcaThenTsne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReductionParams {
    pub variance_target: f64,
    pub tsne_pca_components: usize,
    pub tsne: TsneConfig,
}

impl Default for ReductionParams {
    fn default() -> Self {
        Self {
            variance_target: DEFAULT_VARIANCE_TARGET,
            tsne_pca_components: 50,
            tsne: TsneConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub embedding: Embedding,
    /// The PCA stage that ran first in either mode.
    pub pca: PcaModel,
}

pub fn reduce_for_clustering(x: &Matrix, mode: ReductionMode, params: &ReductionParams) -> Result<Reduction> {
    match mode {
        ReductionMode::Pca => {
            let pca = pca_fit(x, PcaTarget::VarianceRatio(params.variance_target))?;
            let scores = pca.transform(x)?;
            Ok(Reduction {
                embedding: Embedding::from_coords(scores),
                pca,
            })
        }
        ReductionMode::PcaThenTsne => {
            params.tsne.validate(x.rows())?;
            let pca = pca_fit(x, PcaTarget::Components(params.tsne_pca_components))?;
            let scores = pca.transform(x)?;
            let embedding = tsne_embed(&scores, &params.tsne)?;
            Ok(Reduction { embedding, pca })
        }
    }
}
