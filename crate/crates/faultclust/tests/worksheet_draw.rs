//! Per-cluster labeling draws.

use std::collections::{BTreeMap, BTreeSet};

use faultclust::worksheet::{draw, DEFAULT_PER_CLUSTER};
use proptest::prelude::*;

#[test]
fn default_draw_is_seven_per_cluster() {
    assert_eq!(DEFAULT_PER_CLUSTER, 7);
}

#[test]
fn small_clusters_are_taken_whole() {
    let ids: Vec<u64> = (100..130).collect();
    let clusters: Vec<usize> = (0..30).map(|i| if i < 3 { 1 } else { 0 }).collect();
    let w = draw(&ids, &clusters, 3, 1, 7, &BTreeSet::new()).unwrap();
    let by: BTreeMap<usize, Vec<u64>> = w.iter().fold(BTreeMap::new(), |mut m, e| {
        m.entry(e.cluster).or_default().push(e.sample_id);
        m
    });
    assert_eq!(by[&0].len(), 7);
    let mut c1 = by[&1].clone();
    c1.sort();
    assert_eq!(c1, [100, 101, 102]);
    assert!(!by.contains_key(&2), "empty cluster contributes nothing");
}

#[test]
fn labeled_flag_reflects_existing_labels() {
    let ids = [1, 2, 3];
    let labeled: BTreeSet<u64> = [2].into();
    let w = draw(&ids, &[0, 0, 0], 1, 0, 7, &labeled).unwrap();
    assert!(w.iter().all(|e| e.labeled == (e.sample_id == 2)));
}

#[test]
fn out_of_range_clusters_and_length_mismatch_fail() {
    assert!(draw(&[1, 2], &[0, 2], 2, 0, 7, &BTreeSet::new()).is_err());
    assert!(draw(&[1, 2], &[0], 2, 0, 7, &BTreeSet::new()).is_err());
}

#[test]
fn a_cluster_draw_ignores_other_clusters() {
    // Moving members between clusters 1 and 2 must not change cluster 0's draw.
    let ids: Vec<u64> = (0..60).collect();
    let a: Vec<usize> = (0..60).map(|i| i % 3).collect();
    let mut b = a.clone();
    for c in b.iter_mut().filter(|c| **c == 2) {
        *c = 1;
    }
    let c0 = |clusters: &[usize]| -> Vec<u64> {
        draw(&ids, clusters, 3, 11, 5, &BTreeSet::new())
            .unwrap()
            .into_iter()
            .filter(|e| e.cluster == 0)
            .map(|e| e.sample_id)
            .collect()
    };
    assert_eq!(c0(&a), c0(&b));
}

proptest! {
    #[test]
    fn draw_is_a_reproducible_subset_of_min_n_members(
        clusters in prop::collection::vec(0usize..5, 1..80),
        seed in any::<u64>(),
        n in 0usize..10,
    ) {
        let ids: Vec<u64> = (0..clusters.len() as u64).map(|i| i * 3 + 1).collect();
        let w = draw(&ids, &clusters, 5, seed, n, &BTreeSet::new()).unwrap();
        prop_assert_eq!(&w, &draw(&ids, &clusters, 5, seed, n, &BTreeSet::new()).unwrap());
        for c in 0..5 {
            let members: BTreeSet<u64> = ids.iter().zip(&clusters).filter(|(_, &a)| a == c).map(|(&i, _)| i).collect();
            let picked: Vec<u64> = w.iter().filter(|e| e.cluster == c).map(|e| e.sample_id).collect();
            prop_assert_eq!(picked.len(), n.min(members.len()));
            let unique: BTreeSet<u64> = picked.iter().copied().collect();
            prop_assert_eq!(unique.len(), picked.len());
            prop_assert!(unique.is_subset(&members));
        }
    }
}
