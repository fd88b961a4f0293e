//! Memory-bounded point-cloud instance segmentation by landmark
//! sub-sampling.
//!
//! A scene is cut into overlapping full-height blocks. In each block only
//! K landmark points are segmented (so the only quadratic structure is a
//! K x K similarity matrix), after which every point takes the label of its
//! nearest landmark. Per-block results are merged back into one scene
//! labeling and scored with instance mAP.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocks;
pub mod error;
pub mod eval;
pub mod labeling;
pub mod par;
pub mod propagation;
pub mod rng;
pub mod scene_io;
pub mod sampling;
pub mod types;

pub use error::{Error, Result};
pub use propagation::SpatialIndex;
pub use types::{
    modeled_matrix_bytes, FeatureMatrix, InstanceLabeling, LabeledCloud, LandmarkSet, Point3,
    SimilarityMatrix, Strategy, Violation, UNLABELED,
};
