//! External cluster-quality metrics against expert labels.
//!
//! Only labeled samples take part. Per-cluster purity and entropy come from a
//! cluster x category contingency table; aggregate rows report both the plain
//! mean/std over clusters ("raw") and the cluster-size-weighted mean/std
//! ("weighted", using the weighted second central moment).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::silhouette_samples;
use crate::labels::{LabelLevel, LabelRecord};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub level: LabelLevel,
    /// Column names, sorted.
    pub categories: Vec<String>,
    /// `counts[cluster][category]`; one row per cluster `0..k`.
    pub counts: Vec<Vec<u64>>,
    pub row_totals: Vec<u64>,
    pub col_totals: Vec<u64>,
}

impl ContingencyTable {
    /// Builds a table from raw counts, deriving the totals.
    pub fn from_counts(level: LabelLevel, categories: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let l = categories.len();
        if let Some(bad) = counts.iter().position(|r| r.len() != l) {
            return Err(Error::Shape(format!("row {bad} does not have {l} columns")));
        }
        let row_totals = counts.iter().map(|r| r.iter().sum()).collect();
        let col_totals = (0..l).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Self {
            level,
            categories,
            counts,
            row_totals,
            col_totals,
        })
    }

    pub fn clusters(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.row_totals.iter().sum()
    }

    /// Each non-empty row scaled to sum to 100; empty rows stay zero.
    pub fn row_percentages(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .zip(&self.row_totals)
            .map(|(row, &t)| {
                row.iter()
                    .map(|&c| if t > 0 { 100.0 * c as f64 / t as f64 } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    fn nonempty_row(&self, cluster: usize) -> Result<&[u64]> {
        match self.counts.get(cluster) {
            Some(row) if self.row_totals[cluster] > 0 => Ok(row),
            Some(_) => Err(Error::Empty("cluster has no labeled samples")),
            None => Err(Error::InvalidParameter(format!("no cluster {cluster}"))),
        }
    }
}

/// Cluster x category counts over the labeled samples.
///
/// `sample_ids[i]` is assigned to `clusters[i]`; labels for ids without an
/// assignment are an error, unlabeled samples are ignored.
pub fn contingency(
    sample_ids: &[u64],
    clusters: &[usize],
    k: usize,
    labels: &[LabelRecord],
    level: LabelLevel,
) -> Result<ContingencyTable> {
    if sample_ids.len() != clusters.len() {
        return Err(Error::Shape(format!(
            "{} ids for {} assignments",
            sample_ids.len(),
            clusters.len()
        )));
    }
    if let Some(&c) = clusters.iter().find(|&&c| c >= k) {
        return Err(Error::InvalidParameter(format!("cluster index {c} >= k = {k}")));
    }
    let by_id: BTreeMap<u64, usize> = sample_ids.iter().copied().zip(clusters.iter().copied()).collect();
    let categories: Vec<String> = labels
        .iter()
        .map(|l| String::from(l.category(level)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut counts = vec![vec![0u64; categories.len()]; k];
    for label in labels {
        let cluster = *by_id
            .get(&label.sample_id)
            .ok_or(Error::UnknownSample(label.sample_id))?;
        let col = categories
            .binary_search_by(|c| c.as_str().cmp(label.category(level)))
            .expect("category collected above");
        counts[cluster][col] += 1;
    }
    ContingencyTable::from_counts(level, categories, counts)
}

/// `(1/N) sum_k max_j |C_k ∩ T_j|`.
pub fn purity(t: &ContingencyTable) -> Result<f64> {
    let total = t.total();
    if total == 0 {
        return Err(Error::Empty("contingency table"));
    }
    let majority: u64 = t.counts.iter().map(|r| r.iter().copied().max().unwrap_or(0)).sum();
    Ok(majority as f64 / total as f64)
}

/// Majority share within one cluster.
pub fn cluster_purity(t: &ContingencyTable, cluster: usize) -> Result<f64> {
    let row = t.nonempty_row(cluster)?;
    let max = row.iter().copied().max().unwrap_or(0);
    Ok(max as f64 / t.row_totals[cluster] as f64)
}

/// Base-2 Shannon entropy of one cluster's label distribution.
pub fn cluster_entropy(t: &ContingencyTable, cluster: usize) -> Result<f64> {
    let row = t.nonempty_row(cluster)?;
    Ok(entropy_bits(row))
}

fn entropy_bits(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let total = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * libm::log2(p)
        })
        .sum();
    // -0.0 for homogeneous rows reads oddly in reports.
    h.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Unweighted and size-weighted summaries of one per-cluster metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub raw: MeanStd,
    pub weighted: MeanStd,
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> Result<MeanStd> {
    if values.is_empty() {
        return Err(Error::Empty("metric values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(MeanStd {
        mean,
        std: libm::sqrt(var),
    })
}

/// Weighted mean and square root of the weighted second central moment,
/// with weights normalized to sum to one.
pub fn weighted_mean_std(values: &[f64], weights: &[f64]) -> Result<MeanStd> {
    if values.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} values for {} weights",
            values.len(),
            weights.len()
        )));
    }
    if values.is_empty() {
        return Err(Error::Empty("metric values"));
    }
    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::InvalidParameter(
            "weights must be non-negative with a positive sum".into(),
        ));
    }
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / wsum;
    let var = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - mean) * (v - mean))
        .sum::<f64>()
        / wsum;
    Ok(MeanStd {
        mean,
        std: libm::sqrt(var),
    })
}

/// Raw and size-weighted statistics of per-cluster `values`.
pub fn aggregate(values: &[f64], sizes: &[usize]) -> Result<MetricStats> {
    let weights: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    Ok(MetricStats {
        raw: mean_std(values)?,
        weighted: weighted_mean_std(values, &weights)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMetrics {
    pub cluster: usize,
    /// Labeled samples in the cluster.
    pub count: usize,
    pub purity: f64,
    pub entropy: f64,
    pub silhouette: Option<f64>,
}

/// Whole-subset metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalMetrics {
    /// Majority-count purity over all labeled samples.
    pub purity: f64,
    /// Size-weighted mean of cluster entropies (conditional entropy, bits).
    pub entropy: f64,
    /// Mean silhouette over all labeled samples.
    pub silhouette: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub level: LabelLevel,
    pub labeled_samples: usize,
    /// Distinct label categories present.
    pub categories: usize,
    pub per_cluster: Vec<ClusterMetrics>,
    pub purity: MetricStats,
    pub entropy: MetricStats,
    pub silhouette: Option<MetricStats>,
    pub global: GlobalMetrics,
    /// Space the silhouettes were measured in, when computed.
    pub silhouette_space: Option<String>,
    /// How the weighted rows are formed.
    pub weighting: String,
}

pub const WEIGHTING_NOTE: &str =
    "raw: population mean/std over clusters; weighted: weights N_k / sum N_k, std = sqrt of weighted second central moment";

/// Aggregates per-cluster rows; weights are each row's `count`.
pub fn aggregate_report(
    per_cluster: Vec<ClusterMetrics>,
    level: LabelLevel,
    categories: usize,
) -> Result<MetricReport> {
    if per_cluster.is_empty() {
        return Err(Error::Empty("per-cluster metrics"));
    }
    let sizes: Vec<usize> = per_cluster.iter().map(|c| c.count).collect();
    let purities: Vec<f64> = per_cluster.iter().map(|c| c.purity).collect();
    let entropies: Vec<f64> = per_cluster.iter().map(|c| c.entropy).collect();
    let purity = aggregate(&purities, &sizes)?;
    let entropy = aggregate(&entropies, &sizes)?;

    let silhouette = if per_cluster.iter().all(|c| c.silhouette.is_some()) {
        let s: Vec<f64> = per_cluster.iter().filter_map(|c| c.silhouette).collect();
        Some(aggregate(&s, &sizes)?)
    } else {
        None
    };
    let labeled_samples = sizes.iter().sum();
    Ok(MetricReport {
        level,
        labeled_samples,
        categories,
        global: GlobalMetrics {
            purity: purity.weighted.mean,
            entropy: entropy.weighted.mean,
            silhouette: silhouette.map(|s| s.weighted.mean),
        },
        per_cluster,
        purity,
        entropy,
        silhouette,
        silhouette_space: None,
        weighting: String::from(WEIGHTING_NOTE),
    })
}

/// Full evaluation of an assignment against labels.
///
/// `points`, when given, holds one row per entry of `sample_ids` in the space
/// silhouettes should be measured in; silhouettes are computed over the
/// labeled subset only and omitted when that subset spans fewer than two
/// clusters or three samples.
pub fn evaluate(
    sample_ids: &[u64],
    clusters: &[usize],
    k: usize,
    points: Option<&Matrix>,
    labels: &[LabelRecord],
    level: LabelLevel,
) -> Result<MetricReport> {
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let table = contingency(sample_ids, clusters, k, labels, level)?;

    let silhouettes: Option<BTreeMap<usize, f64>> = match points {
        Some(points) => labeled_silhouettes(sample_ids, clusters, points, labels)?,
        None => None,
    };

    let per_cluster = (0..k)
        .filter(|&c| table.row_totals[c] > 0)
        .map(|c| {
            Ok(ClusterMetrics {
                cluster: c,
                count: table.row_totals[c] as usize,
                purity: cluster_purity(&table, c)?,
                entropy: cluster_entropy(&table, c)?,
                silhouette: silhouettes.as_ref().and_then(|s| s.get(&c).copied()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = aggregate_report(per_cluster, level, table.categories.len())?;
    report.global.purity = purity(&table)?;
    Ok(report)
}

/// Mean silhouette per cluster over the labeled subset.
fn labeled_silhouettes(
    sample_ids: &[u64],
    clusters: &[usize],
    points: &Matrix,
    labels: &[LabelRecord],
) -> Result<Option<BTreeMap<usize, f64>>> {
    if points.rows() != sample_ids.len() {
        return Err(Error::Shape(format!(
            "{} point rows for {} samples",
            points.rows(),
            sample_ids.len()
        )));
    }
    let labeled: BTreeSet<u64> = labels.iter().map(|l| l.sample_id).collect();
    let rows: Vec<usize> = (0..sample_ids.len())
        .filter(|&i| labeled.contains(&sample_ids[i]))
        .collect();
    let sub_clusters: Vec<usize> = rows.iter().map(|&i| clusters[i]).collect();
    let distinct: BTreeSet<usize> = sub_clusters.iter().copied().collect();
    if rows.len() < 3 || distinct.len() < 2 {
        return Ok(None);
    }
    let s = silhouette_samples(&points.select_rows(&rows), &sub_clusters)?;
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (&c, v) in sub_clusters.iter().zip(&s) {
        let e = sums.entry(c).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    Ok(Some(sums.into_iter().map(|(c, (s, n))| (c, s / n as f64)).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSize {
    pub cluster: usize,
    pub count: usize,
    pub percent: f64,
}

/// Cluster sizes sorted by count (descending, ties by cluster index). Every
/// cluster index up to the largest one seen is listed.
pub fn cluster_size_table(assignments: &[usize]) -> Vec<ClusterSize> {
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &c in assignments {
        counts[c] += 1;
    }
    let n = assignments.len() as f64;
    let mut rows: Vec<ClusterSize> = counts
        .into_iter()
        .enumerate()
        .map(|(cluster, count)| ClusterSize {
            cluster,
            count,
            percent: 100.0 * count as f64 / n,
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.cluster.cmp(&b.cluster)));
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeDispersion {
    /// Population standard deviation of the sizes.
    pub std: f64,
    /// `std` as a percentage of the total sample count.
    pub std_percent_of_total: f64,
}

pub fn size_dispersion(sizes: &[usize]) -> Result<SizeDispersion> {
    let values: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let ms = mean_std(&values)?;
    let total: f64 = values.iter().sum();
    Ok(SizeDispersion {
        std: ms.std,
        std_percent_of_total: if total > 0.0 { 100.0 * ms.std / total } else { 0.0 },
    })
}
