//! CSV artifacts. Floats are written with Rust's shortest round-trip
//! formatting, so reading a file back reproduces the exact `f64` values and
//! identical inputs always produce identical bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use faultclust_core::labels::LabelRecord;
use faultclust_core::metrics::{ClusterSize, ContingencyTable};
use faultclust_core::Matrix;

use crate::error::{Error, Result};

/// Column naming for embedding files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingHeader {
    /// `x,y[,z]` for t-SNE maps (at most three columns).
    Map,
    /// `pc1..pcd` for PCA scores.
    Components,
}

impl EmbeddingHeader {
    fn names(self, d: usize) -> Vec<String> {
        match self {
            EmbeddingHeader::Map if d <= 3 => ["x", "y", "z"][..d].iter().map(|s| s.to_string()).collect(),
            _ => (1..=d).map(|i| format!("pc{i}")).collect(),
        }
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_id_matrix(path: &Path, header: Vec<String>, ids: &[u64], m: &Matrix) -> Result<()> {
    if ids.len() != m.rows() {
        return Err(faultclust_core::Error::Shape(format!("{} ids for {} rows", ids.len(), m.rows())).into());
    }
    let mut w = writer(path)?;
    let mut head = vec!["record_id".to_string()];
    head.extend(header);
    w.write_record(&head).map_err(|e| Error::csv(path, e))?;
    let mut row = Vec::with_capacity(m.cols() + 1);
    for (id, values) in ids.iter().zip(m.iter_rows()) {
        row.clear();
        row.push(id.to_string());
        row.extend(values.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

/// Reads a `record_id,<columns...>` file; returns ids, column names and values.
fn read_id_matrix(path: &Path) -> Result<(Vec<u64>, Vec<String>, Matrix)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.get(0) != Some("record_id") {
        return Err(Error::malformed(path, "first column must be record_id"));
    }
    let cols = headers.len() - 1;
    let names = headers.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = |what: &str| Error::malformed(path, format!("data row {}: {what}", line + 1));
        ids.push(
            rec[0]
                .trim()
                .parse::<u64>()
                .map_err(|_| bad("record_id is not an integer"))?,
        );
        for field in rec.iter().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| bad("value is not a number"))?;
            if !v.is_finite() {
                return Err(bad("non-finite value"));
            }
            data.push(v);
        }
    }
    let m = Matrix::from_vec(ids.len(), cols, data)?;
    Ok((ids, names, m))
}

pub fn write_features(path: impl AsRef<Path>, ids: &[u64], values: &Matrix) -> Result<()> {
    let header = (0..values.cols()).map(|j| format!("f{j}")).collect();
    write_id_matrix(path.as_ref(), header, ids, values)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<(Vec<u64>, Matrix)> {
    let (ids, _, m) = read_id_matrix(path.as_ref())?;
    Ok((ids, m))
}

pub fn write_embedding(path: impl AsRef<Path>, ids: &[u64], coords: &Matrix, header: EmbeddingHeader) -> Result<()> {
    write_id_matrix(path.as_ref(), header.names(coords.cols()), ids, coords)
}

pub fn read_embedding(path: impl AsRef<Path>) -> Result<(Vec<u64>, Matrix)> {
    let (ids, _, m) = read_id_matrix(path.as_ref())?;
    Ok((ids, m))
}

pub fn write_assignments(path: impl AsRef<Path>, ids: &[u64], clusters: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["record_id", "cluster"])
        .map_err(|e| Error::csv(path, e))?;
    for (id, c) in ids.iter().zip(clusters) {
        w.write_record([id.to_string(), c.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

pub fn read_assignments(path: impl AsRef<Path>) -> Result<(Vec<u64>, Vec<usize>)> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut ids = Vec::new();
    let mut clusters = Vec::new();
    for rec in r.deserialize::<(u64, usize)>() {
        let (id, c) = rec.map_err(|e| Error::csv(path, e))?;
        ids.push(id);
        clusters.push(c);
    }
    Ok((ids, clusters))
}

pub fn write_cluster_sizes(path: impl AsRef<Path>, sizes: &[ClusterSize]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["cluster", "count", "percent"])
        .map_err(|e| Error::csv(path, e))?;
    for s in sizes {
        w.write_record([s.cluster.to_string(), s.count.to_string(), s.percent.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

/// Writes raw counts and row percentages side by side as two files.
pub fn write_contingency(
    counts_path: impl AsRef<Path>,
    percent_path: impl AsRef<Path>,
    t: &ContingencyTable,
) -> Result<()> {
    let counts: Vec<Vec<String>> = t
        .counts
        .iter()
        .map(|r| r.iter().map(u64::to_string).collect())
        .collect();
    let percents: Vec<Vec<String>> = t
        .row_percentages()
        .iter()
        .map(|r| r.iter().map(f64::to_string).collect())
        .collect();
    for (path, rows) in [(counts_path.as_ref(), counts), (percent_path.as_ref(), percents)] {
        let mut w = writer(path)?;
        let mut head = vec!["cluster".to_string()];
        head.extend(t.categories.iter().cloned());
        w.write_record(&head).map_err(|e| Error::csv(path, e))?;
        for (c, row) in rows.into_iter().enumerate() {
            let mut rec = vec![c.to_string()];
            rec.extend(row);
            w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
        }
        finish(w, path)?;
    }
    Ok(())
}

pub fn write_kl_trace(path: impl AsRef<Path>, trace: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["iteration", "kl"]).map_err(|e| Error::csv(path, e))?;
    for (i, v) in trace.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

pub fn write_elbow(path: impl AsRef<Path>, curve: &[(usize, f64)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["k", "inertia"]).map_err(|e| Error::csv(path, e))?;
    for (k, v) in curve {
        w.write_record([k.to_string(), v.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

/// Label table with header `sample_id,fault_class,fault_type,phase,comment`.
/// Every row is checked against the vocabulary.
pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for rec in r.deserialize::<LabelRecord>() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_labels_csv(path: impl AsRef<Path>, labels: &[LabelRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    // An empty table still gets its header.
    if labels.is_empty() {
        w.write_record(["sample_id", "fault_class", "fault_type", "phase", "comment"])
            .map_err(|e| Error::csv(path, e))?;
    }
    for l in labels {
        w.serialize(l).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
