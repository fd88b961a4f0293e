//! Nearest-landmark label propagation.
//!
//! Every query point takes the label of its exact nearest landmark, so the
//! output is the labeling induced by the landmarks' Voronoi cells. Ties go
//! to the landmark listed first in the [`LandmarkSet`].

mod index;

pub use index::SpatialIndex;

use crate::error::{Error, Result};
use crate::par;
use crate::types::{FeatureMatrix, InstanceLabeling, LabeledCloud, LandmarkSet, Point3};

const QUERY_CHUNK: usize = 256;

/// Labels every point of `cloud` from its nearest landmark in Euclidean space.
pub fn propagate(
    cloud: &LabeledCloud,
    landmarks: &LandmarkSet,
    landmark_labels: &InstanceLabeling,
) -> Result<InstanceLabeling> {
    landmark_labels.check_len(landmarks.len(), "landmark labels")?;
    let all: Vec<usize> = (0..cloud.len()).collect();
    propagate_to(&cloud.points, landmarks.indices(), landmark_labels, &all)
}

/// Labels the points `queries` (indices into `points`) from landmarks that are
/// themselves indices into `points`.
pub fn propagate_to(
    points: &[Point3],
    landmarks: &[usize],
    landmark_labels: &InstanceLabeling,
    queries: &[usize],
) -> Result<InstanceLabeling> {
    landmark_labels.check_len(landmarks.len(), "landmark labels")?;
    let index = SpatialIndex::from_point_subset(points, landmarks)?;
    let nearest = nearest_for_each(queries.len(), |i| index.nearest_point(&points[queries[i]]).0);
    Ok(gather(landmark_labels, &nearest))
}

/// Same contract as [`propagate`], with distances measured between feature rows.
pub fn propagate_feature_space(
    features: &FeatureMatrix,
    landmarks: &LandmarkSet,
    landmark_labels: &InstanceLabeling,
) -> Result<InstanceLabeling> {
    let all: Vec<usize> = (0..features.rows()).collect();
    propagate_features_to(features, landmarks.indices(), landmark_labels, &all)
}

/// Feature-space counterpart of [`propagate_to`]; `landmarks` and `queries`
/// index rows of `features`.
pub fn propagate_features_to(
    features: &FeatureMatrix,
    landmarks: &[usize],
    landmark_labels: &InstanceLabeling,
    queries: &[usize],
) -> Result<InstanceLabeling> {
    landmark_labels.check_len(landmarks.len(), "landmark labels")?;
    if let Some(&bad) = queries.iter().find(|&&q| q >= features.rows()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: features.rows(),
        });
    }
    let index = SpatialIndex::from_feature_rows(features, landmarks)?;
    let nearest = nearest_for_each(queries.len(), |i| {
        let q: Vec<f64> = features.row(queries[i]).iter().map(|&v| f64::from(v)).collect();
        index.nearest(&q).0
    });
    Ok(gather(landmark_labels, &nearest))
}

/// Checks that `features` describes `cloud` and propagates in feature space.
pub fn propagate_feature_space_for(
    cloud: &LabeledCloud,
    features: &FeatureMatrix,
    landmarks: &LandmarkSet,
    landmark_labels: &InstanceLabeling,
) -> Result<InstanceLabeling> {
    if features.rows() != cloud.len() {
        return Err(Error::LengthMismatch {
            what: "feature rows",
            expected: cloud.len(),
            found: features.rows(),
        });
    }
    propagate_feature_space(features, landmarks, landmark_labels)
}

fn nearest_for_each<F>(n: usize, f: F) -> Vec<usize>
where
    F: Fn(usize) -> usize + Sync + Send,
{
    let mut out = vec![0usize; n];
    par::for_each_chunk_mut(&mut out, QUERY_CHUNK, |ci, chunk| {
        let base = ci * QUERY_CHUNK;
        for (j, slot) in chunk.iter_mut().enumerate() {
            *slot = f(base + j);
        }
    });
    out
}

fn gather(source: &InstanceLabeling, nearest: &[usize]) -> InstanceLabeling {
    InstanceLabeling {
        labels: nearest.iter().map(|&l| source.labels[l]).collect(),
        categories: source
            .categories
            .as_ref()
            .map(|c| nearest.iter().map(|&l| c[l]).collect()),
    }
}
