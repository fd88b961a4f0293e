//! Landmark labelers.
//!
//! A labeler maps a resampled block and the landmarks chosen in it to one
//! instance id per landmark. Three are provided: a similarity-matrix
//! grouper over per-point features, a single-linkage geometric oracle, and
//! a ground-truth copier that isolates propagation error.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blocks::ResampledBlock;
use crate::error::{Error, Result};
use crate::par;
use crate::propagation::SpatialIndex;
use crate::types::{FeatureMatrix, InstanceLabeling, LabeledCloud, LandmarkSet, SimilarityMatrix, UNLABELED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelerKind {
    Similarity,
    Oracle,
    GroundTruth,
}

impl FromStr for LabelerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "similarity" => Ok(Self::Similarity),
            "oracle" => Ok(Self::Oracle),
            "ground-truth" | "gt" => Ok(Self::GroundTruth),
            other => Err(Error::Config(format!("unknown labeler {other:?}"))),
        }
    }
}

impl LabelerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Similarity => "similarity",
            Self::Oracle => "oracle",
            Self::GroundTruth => "ground-truth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelerConfig {
    pub kind: LabelerKind,
    /// Feature distance at or below which two landmarks propose the same group.
    pub tau: f64,
    /// Link radius of the oracle, in meters.
    pub radius: f64,
    /// Groups with fewer landmarks become [`UNLABELED`].
    pub min_group: usize,
}

impl LabelerConfig {
    pub fn new(kind: LabelerKind) -> Self {
        Self {
            kind,
            tau: 1.0,
            radius: 0.15,
            min_group: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::Config(format!("tau must be >= 0, got {}", self.tau)));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::Config(format!("radius must be > 0, got {}", self.radius)));
        }
        Ok(())
    }

    /// Builds the labeler. `features` index scene points and are required
    /// by the similarity grouper.
    pub fn build<'a>(&self, features: Option<&'a FeatureMatrix>) -> Result<Box<dyn Labeler + 'a>> {
        self.validate()?;
        Ok(match self.kind {
            LabelerKind::Similarity => Box::new(SimilarityLabeler {
                features: features
                    .ok_or_else(|| Error::Config("the similarity labeler needs a feature matrix".into()))?,
                tau: self.tau,
                min_group: self.min_group,
            }),
            LabelerKind::Oracle => Box::new(OracleLabeler {
                radius: self.radius,
                min_group: self.min_group,
            }),
            LabelerKind::GroundTruth => Box::new(GroundTruthLabeler),
        })
    }
}

/// Labels the landmarks of one block.
pub trait Labeler: Sync {
    fn label(&self, block: &ResampledBlock, landmarks: &LandmarkSet) -> Result<InstanceLabeling>;
}

pub struct SimilarityLabeler<'a> {
    pub features: &'a FeatureMatrix,
    pub tau: f64,
    pub min_group: usize,
}

impl Labeler for SimilarityLabeler<'_> {
    fn label(&self, block: &ResampledBlock, landmarks: &LandmarkSet) -> Result<InstanceLabeling> {
        let rows: Vec<usize> = landmarks.indices().iter().map(|&i| block.source[i]).collect();
        let s = similarity_of_rows(self.features, &rows)?;
        Ok(group_from_similarity(&s, self.tau, self.min_group))
    }
}

pub struct OracleLabeler {
    pub radius: f64,
    pub min_group: usize,
}

impl Labeler for OracleLabeler {
    fn label(&self, block: &ResampledBlock, landmarks: &LandmarkSet) -> Result<InstanceLabeling> {
        let mut out = oracle_label(&block.cloud, landmarks, self.radius)?;
        drop_small_groups(&mut out.labels, self.min_group);
        Ok(out)
    }
}

pub struct GroundTruthLabeler;

impl Labeler for GroundTruthLabeler {
    fn label(&self, block: &ResampledBlock, landmarks: &LandmarkSet) -> Result<InstanceLabeling> {
        ground_truth_label(&block.cloud, landmarks)
    }
}

/// Pairwise Euclidean distances between the feature rows of the landmarks.
pub fn compute_similarity(features: &FeatureMatrix, subset: &LandmarkSet) -> Result<SimilarityMatrix> {
    similarity_of_rows(features, subset.indices())
}

/// Similarity matrix over arbitrary feature rows (repeats allowed).
///
/// Each unordered pair is evaluated once, in f64, and stored in both
/// triangles, so the result is exactly symmetric.
pub fn similarity_of_rows(features: &FeatureMatrix, rows: &[usize]) -> Result<SimilarityMatrix> {
    if let Some(&bad) = rows.iter().find(|&&r| r >= features.rows()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: features.rows(),
        });
    }
    let k = rows.len();
    let d = features.cols();
    let dense: Vec<f64> = rows
        .iter()
        .flat_map(|&r| features.row(r).iter().map(|&v| f64::from(v)))
        .collect();
    let mut data = vec![0.0f32; k * k];
    par::for_each_chunk_mut(&mut data, k.max(1), |i, row| {
        let a = &dense[i * d..(i + 1) * d];
        for (j, b) in dense.chunks_exact(d.max(1)).enumerate().skip(i + 1) {
            row[j] = distance(a, b) as f32;
        }
    });
    // Mirror into the lower triangle tile by tile to stay in cache.
    const TILE: usize = 64;
    for ti in (0..k).step_by(TILE) {
        for tj in (0..=ti).step_by(TILE) {
            for i in ti..(ti + TILE).min(k) {
                for j in tj..(tj + TILE).min(i) {
                    data[i * k + j] = data[j * k + i];
                }
            }
        }
    }
    Ok(SimilarityMatrix::from_parts_unchecked(k, data))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    // Four independent lanes let the compiler vectorise the reduction.
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            let t = x[l] - y[l];
            acc[l] += t * t;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let t = x - y;
        tail += t * t;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3]) + tail).sqrt()
}

/// Greedy merge of the row-wise group proposals `{j : S_ij <= tau}`.
///
/// Proposals are visited largest first; each claims the members nobody
/// has claimed yet. Equal sizes are ordered by the sum of the member
/// distances, then by row. The sum is taken in fixed point so it does not
/// depend on member order.
pub fn group_from_similarity(s: &SimilarityMatrix, tau: f64, min_group: usize) -> InstanceLabeling {
    let k = s.dim();
    let tau = tau as f32;
    // Largest power of two that keeps k * tau * scale below 2^126.
    let bound = (f64::from(tau).max(f64::MIN_POSITIVE) * k.max(1) as f64).log2().ceil();
    let scale = 2f64.powi((126.0 - bound).clamp(-1000.0, 1000.0) as i32);
    let keys: Vec<(usize, u128)> = par::map_range(k, |i| {
        s.row(i)
            .iter()
            .filter(|&&v| v <= tau)
            .fold((0, 0u128), |(n, sum), &v| (n + 1, sum + (f64::from(v) * scale) as u128))
    });
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        keys[b]
            .0
            .cmp(&keys[a].0)
            .then(keys[a].1.cmp(&keys[b].1))
            .then(a.cmp(&b))
    });
    let mut labels = vec![UNLABELED; k];
    let mut next = 0u32;
    for i in order {
        let mut claimed = false;
        for (j, &v) in s.row(i).iter().enumerate() {
            if v <= tau && labels[j] == UNLABELED {
                labels[j] = next;
                claimed = true;
            }
        }
        if claimed {
            next += 1;
        }
    }
    drop_small_groups(&mut labels, min_group);
    InstanceLabeling::new(labels)
}

/// Single-linkage components of the landmarks under link distance `radius`.
/// Components are numbered in order of their first landmark.
pub fn oracle_label(cloud: &LabeledCloud, subset: &LandmarkSet, radius: f64) -> Result<InstanceLabeling> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("oracle radius must be > 0, got {radius}")));
    }
    let idx = subset.indices();
    let index = SpatialIndex::from_point_subset(&cloud.points, idx)?;
    let neighbours = par::map_slice(idx, |&p| index.within_radius(&cloud.points[p].to_array(), radius));
    let mut uf = UnionFind::new(idx.len());
    for (i, ns) in neighbours.iter().enumerate() {
        for &j in ns {
            uf.union(i, j);
        }
    }
    Ok(InstanceLabeling::new(uf.dense_labels()))
}

/// Copies the ground-truth instance (and category, when present) of each landmark.
pub fn ground_truth_label(cloud: &LabeledCloud, subset: &LandmarkSet) -> Result<InstanceLabeling> {
    let gt = cloud.gt_instance.as_ref().ok_or(Error::MissingGroundTruth)?;
    let labels = subset.indices().iter().map(|&i| gt[i]).collect();
    Ok(InstanceLabeling {
        labels,
        categories: cloud
            .gt_category
            .as_ref()
            .map(|c| subset.indices().iter().map(|&i| c[i]).collect()),
    })
}

fn drop_small_groups(labels: &mut [u32], min_group: usize) {
    if min_group <= 1 {
        return;
    }
    let mut counts = std::collections::HashMap::new();
    for &l in labels.iter().filter(|&&l| l != UNLABELED) {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    for l in labels.iter_mut() {
        if *l != UNLABELED && counts[l] < min_group {
            *l = UNLABELED;
        }
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Lower root wins so roots are stable under union order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    /// Component ids 0.. in order of each component's first element.
    pub(crate) fn dense_labels(&mut self) -> Vec<u32> {
        let n = self.parent.len();
        let mut id_of_root = vec![u32::MAX; n];
        let mut next = 0u32;
        (0..n)
            .map(|i| {
                let r = self.find(i);
                if id_of_root[r] == u32::MAX {
                    id_of_root[r] = next;
                    next += 1;
                }
                id_of_root[r]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::types::{Point3, Strategy};
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn all_landmarks(n: usize) -> LandmarkSet {
        LandmarkSet::new((0..n).collect(), n, Strategy::Random, 0).unwrap()
    }

    fn same_partition(a: &[u32], b: &[u32]) -> bool {
        let mut fwd = std::collections::HashMap::new();
        let mut back = std::collections::HashMap::new();
        a.iter().zip(b).all(|(&x, &y)| {
            *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x
        })
    }

    #[test]
    fn identical_rows_give_zero_matrix() {
        let f = FeatureMatrix::new(4, 3, vec![1.5; 12]).unwrap();
        let s = compute_similarity(&f, &all_landmarks(4)).unwrap();
        assert!((0..4).all(|i| s.row(i).iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn three_four_five() {
        let f = FeatureMatrix::new(2, 2, vec![0.0, 0.0, 3.0, 4.0]).unwrap();
        let s = compute_similarity(&f, &all_landmarks(2)).unwrap();
        assert_eq!(s.get(0, 1), 5.0);
        assert_eq!(s.get(1, 0), 5.0);
    }

    #[test]
    fn random_features_match_double_loop() {
        let mut rng = rng_from_seed(21);
        let data: Vec<f32> = (0..16 * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = FeatureMatrix::new(16, 8, data.clone()).unwrap();
        let s = compute_similarity(&f, &all_landmarks(16)).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let d: f64 = (0..8)
                    .map(|c| f64::from(data[i * 8 + c] - data[j * 8 + c]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!((f64::from(s.get(i, j)) - d).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn out_of_range_subset_is_rejected() {
        let f = FeatureMatrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        let lm = LandmarkSet::new(vec![0, 2], 3, Strategy::Random, 0).unwrap();
        assert!(matches!(compute_similarity(&f, &lm), Err(Error::IndexOutOfRange { .. })));
    }

    fn block_matrix() -> SimilarityMatrix {
        let cluster = [0, 1, 0, 1, 1, 0];
        let data = (0..36)
            .map(|e| {
                let (i, j) = (e / 6, e % 6);
                if i == j || cluster[i] == cluster[j] {
                    0.0
                } else {
                    10.0
                }
            })
            .collect();
        SimilarityMatrix::from_row_major(6, data).unwrap()
    }

    #[test]
    fn block_diagonal_matrix_recovers_blocks() {
        let out = group_from_similarity(&block_matrix(), 1.0, 1);
        assert!(same_partition(&out.labels, &[0, 1, 0, 1, 1, 0]));
        let distinct: std::collections::HashSet<_> = out.labels.iter().collect();
        assert_eq!(distinct.len(), 2);
    }

    #[test]
    fn single_landmark_is_one_group() {
        let s = SimilarityMatrix::from_row_major(1, vec![0.0]).unwrap();
        assert_eq!(group_from_similarity(&s, 1.0, 1).labels, vec![0]);
    }

    #[test]
    fn zero_tau_yields_singletons() {
        let mut rng = rng_from_seed(2);
        let data: Vec<f32> = (0..20).map(|_| rng.random_range(0.5..1.0)).collect();
        let f = FeatureMatrix::new(10, 2, data).unwrap();
        let s = compute_similarity(&f, &all_landmarks(10)).unwrap();
        let mut labels = group_from_similarity(&s, 0.0, 1).labels;
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(labels.len(), 10);
    }

    #[test]
    fn small_groups_become_unlabeled() {
        let out = group_from_similarity(&block_matrix(), 1.0, 4);
        assert!(out.labels.iter().all(|&l| l == UNLABELED));
        let out = group_from_similarity(&block_matrix(), 1.0, 3);
        assert!(out.labels.iter().all(|&l| l != UNLABELED));
    }

    #[test]
    fn grouping_is_permutation_equivariant() {
        let mut rng = rng_from_seed(77);
        for _ in 0..20 {
            let k = rng.random_range(2..40);
            let data: Vec<f32> = (0..k * 3).map(|_| rng.random_range(0.0..3.0)).collect();
            let f = FeatureMatrix::new(k, 3, data).unwrap();
            let base = compute_similarity(&f, &all_landmarks(k)).unwrap();
            let labels = group_from_similarity(&base, 0.8, 1).labels;
            let mut perm: Vec<usize> = (0..k).collect();
            perm.shuffle(&mut rng);
            let lm = LandmarkSet::new(perm.clone(), k, Strategy::Random, 0).unwrap();
            let permuted = group_from_similarity(&compute_similarity(&f, &lm).unwrap(), 0.8, 1).labels;
            let expected: Vec<u32> = perm.iter().map(|&p| labels[p]).collect();
            assert!(same_partition(&permuted, &expected));
        }
    }

    fn cloud_of(points: Vec<Point3>) -> LabeledCloud {
        LabeledCloud::from_points(points)
    }

    #[test]
    fn oracle_splits_separated_clusters() {
        let r = 0.1;
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(Point3::new(i as f64 * 0.05, 0.0, 0.0));
            pts.push(Point3::new(10.0 * r + 0.45 + i as f64 * 0.05, 0.0, 0.0));
        }
        let out = oracle_label(&cloud_of(pts), &all_landmarks(20), r).unwrap();
        for i in 0..10 {
            assert_eq!(out.labels[2 * i], 0);
            assert_eq!(out.labels[2 * i + 1], 1);
        }
    }

    #[test]
    fn oracle_single_and_chain() {
        let one = oracle_label(&cloud_of(vec![Point3::default()]), &all_landmarks(1), 0.1).unwrap();
        assert_eq!(one.labels, vec![0]);
        let chain: Vec<Point3> = (0..50).map(|i| Point3::new(i as f64 * 0.09, 0.0, 0.0)).collect();
        let out = oracle_label(&cloud_of(chain), &all_landmarks(50), 0.1).unwrap();
        assert!(out.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn ground_truth_copies_landmark_ids() {
        let mut c = cloud_of(vec![Point3::default(); 4]);
        assert!(matches!(
            ground_truth_label(&c, &all_landmarks(4)),
            Err(Error::MissingGroundTruth)
        ));
        c.gt_instance = Some(vec![7, 8, 9, 7]);
        let lm = LandmarkSet::new(vec![2, 0], 4, Strategy::Random, 0).unwrap();
        assert_eq!(ground_truth_label(&c, &lm).unwrap().labels, vec![9, 7]);
        assert_eq!(ground_truth_label(&c, &all_landmarks(4)).unwrap().labels, vec![7, 8, 9, 7]);
    }

    #[test]
    fn similarity_labeler_requires_features() {
        let cfg = LabelerConfig::new(LabelerKind::Similarity);
        assert!(cfg.build(None).is_err());
        let bad = LabelerConfig {
            radius: 0.0,
            ..LabelerConfig::new(LabelerKind::Oracle)
        };
        assert!(bad.build(None).is_err());
    }
}
