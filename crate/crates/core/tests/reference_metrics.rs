//! Reference per-cluster counts and scores: every aggregate value must be
//! reproducible from the per-cluster rows.

use faultclust_core::labels::LabelLevel;
use faultclust_core::metrics::{aggregate, cluster_entropy, cluster_purity, purity, size_dispersion, ContingencyTable};

fn single_row(counts: &[u64]) -> ContingencyTable {
    let cats = (0..counts.len()).map(|j| format!("type {j}")).collect();
    ContingencyTable::from_counts(LabelLevel::EventType, cats, vec![counts.to_vec()]).unwrap()
}

/// (count, purity, entropy, silhouette) of one cluster.
type Row = (usize, f64, f64, f64);

/// Per K-Means PCA cluster.
const PCA_CLUSTERS: [Row; 14] = [
    (80, 0.425, 1.928, -0.725),
    (53, 0.642, 1.219, -0.826),
    (27, 0.815, 0.945, -0.852),
    (12, 0.917, 0.414, -0.762),
    (8, 0.750, 0.811, -0.893),
    (4, 0.500, 1.500, -0.469),
    (3, 0.667, 0.918, -0.823),
    (3, 1.000, 0.000, 0.207),
    (2, 1.000, 0.000, 0.991),
    (2, 0.500, 1.000, -0.898),
    (4, 0.500, 1.000, -0.707),
    (2, 1.000, 0.000, -0.656),
    (2, 1.000, 0.000, -0.634),
    (2, 0.500, 1.000, -0.855),
];

/// Same for K-Means t-SNE.
const TSNE_CLUSTERS: [Row; 15] = [
    (22, 0.864, 0.700, -0.499),
    (16, 0.500, 1.781, -0.439),
    (13, 0.846, 0.773, -0.528),
    (9, 0.667, 1.224, -0.519),
    (17, 0.529, 1.659, -0.006),
    (9, 0.444, 1.837, -0.115),
    (14, 0.500, 1.724, -0.481),
    (14, 0.857, 0.735, -0.398),
    (12, 1.000, 0.000, -0.463),
    (10, 0.400, 1.846, -0.496),
    (17, 0.824, 0.834, -0.386),
    (17, 0.882, 0.640, -0.515),
    (9, 0.778, 0.764, -0.354),
    (13, 0.615, 1.489, -0.480),
    (12, 0.917, 0.414, -0.256),
];

const PCA_SIZES: [usize; 15] = [7364, 1626, 704, 439, 411, 300, 222, 207, 164, 144, 143, 109, 98, 93, 29];
const TSNE_SIZES: [usize; 15] = [
    1169, 1141, 938, 916, 890, 849, 821, 753, 752, 741, 725, 682, 626, 579, 471,
];

fn close(actual: f64, expected: f64, tol: f64) -> bool {
    (actual - expected).abs() <= tol
}

#[test]
fn eleven_to_one_split() {
    let t = single_row(&[11, 1]);
    assert!(close(cluster_purity(&t, 0).unwrap(), 0.917, 0.001));
    assert!(close(cluster_entropy(&t, 0).unwrap(), 0.414, 0.001));
}

#[test]
fn one_to_one_split() {
    let t = single_row(&[1, 1]);
    assert_eq!(cluster_purity(&t, 0).unwrap(), 0.5);
    assert_eq!(cluster_entropy(&t, 0).unwrap(), 1.0);
}

#[test]
fn homogeneous_clusters() {
    for n in [2, 3, 12] {
        let t = single_row(&[0, n, 0]);
        assert_eq!(cluster_purity(&t, 0).unwrap(), 1.0);
        assert_eq!(cluster_entropy(&t, 0).unwrap(), 0.0);
        assert_eq!(purity(&t).unwrap(), 1.0);
    }
}

fn column(rows: &[Row], pick: fn(&Row) -> f64) -> Vec<f64> {
    rows.iter().map(pick).collect()
}

fn sizes(rows: &[Row]) -> Vec<usize> {
    rows.iter().map(|r| r.0).collect()
}

#[test]
fn pca_weighted_purity() {
    let s = aggregate(&column(&PCA_CLUSTERS, |r| r.1), &sizes(&PCA_CLUSTERS)).unwrap();
    assert!(close(s.weighted.mean, 0.608, 0.002), "{}", s.weighted.mean);
    assert_eq!(sizes(&PCA_CLUSTERS).iter().sum::<usize>(), 204);
}

#[test]
fn all_aggregate_rows() {
    // (purity, entropy, silhouette) as (raw mean, raw std, weighted mean, weighted std).
    let expected_pca = [
        (0.730, 0.216, 0.608, 0.182),
        (0.767, 0.585, 1.336, 0.555),
        (-0.564, 0.510, -0.744, 0.222),
    ];
    let expected_tsne = [
        (0.708, 0.189, 0.721, 0.184),
        (1.095, 0.572, 1.073, 0.557),
        (-0.396, 0.151, -0.399, 0.153),
    ];
    let picks: [fn(&Row) -> f64; 3] = [|r| r.1, |r| r.2, |r| r.3];
    for (rows, expected) in [(&PCA_CLUSTERS[..], expected_pca), (&TSNE_CLUSTERS[..], expected_tsne)] {
        for (pick, (rm, rs, wm, ws)) in picks.iter().zip(expected) {
            let s = aggregate(&column(rows, *pick), &sizes(rows)).unwrap();
            assert!(close(s.raw.mean, rm, 0.002), "raw mean {} vs {rm}", s.raw.mean);
            assert!(close(s.raw.std, rs, 0.002), "raw std {} vs {rs}", s.raw.std);
            assert!(
                close(s.weighted.mean, wm, 0.002),
                "weighted mean {} vs {wm}",
                s.weighted.mean
            );
            assert!(
                close(s.weighted.std, ws, 0.002),
                "weighted std {} vs {ws}",
                s.weighted.std
            );
        }
    }
}

#[test]
fn size_dispersion_of_both_partitions() {
    let pca = size_dispersion(&PCA_SIZES).unwrap();
    assert!(close(pca.std, 1794.0, 1.0), "{}", pca.std);
    assert!(close(pca.std_percent_of_total, 14.89, 0.05));
    let tsne = size_dispersion(&TSNE_SIZES).unwrap();
    assert!(close(tsne.std, 184.0, 1.0), "{}", tsne.std);
    assert!(close(tsne.std_percent_of_total, 1.53, 0.05));
    assert_eq!(PCA_SIZES.iter().sum::<usize>(), 12_053);
    assert_eq!(TSNE_SIZES.iter().sum::<usize>(), 12_053);
}
