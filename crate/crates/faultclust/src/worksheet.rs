//! Labeling worksheets: a fixed-size random draw of members per cluster.
//!
//! Cluster `c` is sampled with its own generator seeded from
//! `derive_seed(seed, c)`, so changing one cluster's membership never
//! reshuffles another's draw.

use std::collections::BTreeSet;
use std::path::Path;

use faultclust_core::rng::{derive_seed, SplitMix64};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PER_CLUSTER: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorksheetEntry {
    pub cluster: usize,
    pub sample_id: u64,
    /// Whether a label already exists for the sample.
    pub labeled: bool,
}

/// Draws `min(per_cluster, N_k)` members of every cluster `0..k`.
///
/// Members are taken in assignment order, shuffled, and truncated; entries
/// come out grouped by cluster.
pub fn draw(
    ids: &[u64],
    clusters: &[usize],
    k: usize,
    seed: u64,
    per_cluster: usize,
    labeled: &BTreeSet<u64>,
) -> Result<Vec<WorksheetEntry>> {
    if ids.len() != clusters.len() {
        return Err(
            faultclust_core::Error::Shape(format!("{} ids for {} assignments", ids.len(), clusters.len())).into(),
        );
    }
    if let Some(&c) = clusters.iter().find(|&&c| c >= k) {
        return Err(faultclust_core::Error::InvalidParameter(format!("cluster {c} out of range for k = {k}")).into());
    }
    let mut out = Vec::new();
    for c in 0..k {
        let mut members: Vec<u64> = ids
            .iter()
            .zip(clusters)
            .filter(|&(_, &a)| a == c)
            .map(|(&id, _)| id)
            .collect();
        SplitMix64::new(derive_seed(seed, c as u64)).shuffle(&mut members);
        members.truncate(per_cluster);
        out.extend(members.into_iter().map(|sample_id| WorksheetEntry {
            cluster: c,
            sample_id,
            labeled: labeled.contains(&sample_id),
        }));
    }
    Ok(out)
}

pub fn write_csv(path: impl AsRef<Path>, entries: &[WorksheetEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    if entries.is_empty() {
        w.write_record(["cluster", "sample_id", "labeled"])
            .map_err(|e| Error::csv(path, e))?;
    }
    for e in entries {
        w.serialize(e).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
