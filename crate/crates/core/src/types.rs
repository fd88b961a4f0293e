//! Domain types shared by every pipeline stage.
//!
//! Values here carry no algorithms beyond invariant checks. Clouds are
//! plain data and may be built in an invalid state so that
//! [`LabeledCloud::validate`] can report every problem at once; the other
//! containers validate on construction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved instance id for points that carry no instance.
pub const UNLABELED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dist_sq(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// A single failed cloud invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    NonFiniteCoordinate { index: usize },
    LabelLengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "empty cloud"),
            Violation::NonFiniteCoordinate { index } => {
                write!(f, "non-finite coordinate at point {index}")
            }
            Violation::LabelLengthMismatch {
                field,
                expected,
                found,
            } => write!(
                f,
                "label length mismatch: {field} has {found} entries for {expected} points"
            ),
        }
    }
}

/// N points with optional colors and optional ground-truth labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledCloud {
    pub points: Vec<Point3>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub gt_instance: Option<Vec<u32>>,
    pub gt_category: Option<Vec<u32>>,
}

impl LabeledCloud {
    pub fn from_points(points: Vec<Point3>) -> Self {
        Self {
            points,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Collects every violated invariant. An empty list means the cloud is valid.
    pub fn violations(&self) -> Vec<Violation> {
        let n = self.points.len();
        let mut out = Vec::new();
        if n == 0 {
            out.push(Violation::Empty);
        }
        if let Some(index) = self.points.iter().position(|p| !p.is_finite()) {
            out.push(Violation::NonFiniteCoordinate { index });
        }
        let mut check = |field, len: Option<usize>| {
            if let Some(found) = len {
                if found != n {
                    out.push(Violation::LabelLengthMismatch {
                        field,
                        expected: n,
                        found,
                    });
                }
            }
        };
        check("colors", self.colors.as_ref().map(Vec::len));
        check("gt_instance", self.gt_instance.as_ref().map(Vec::len));
        check("gt_category", self.gt_category.as_ref().map(Vec::len));
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidCloud(v))
        }
    }

    /// Copies the listed points (with every present per-point array) into a new cloud.
    /// Indices may repeat.
    pub fn select(&self, indices: &[usize]) -> LabeledCloud {
        let pick = |v: &Vec<_>| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        LabeledCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: self.colors.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
            gt_instance: self.gt_instance.as_ref().map(pick),
            gt_category: self.gt_category.as_ref().map(pick),
        }
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounds(&self) -> (Point3, Point3) {
        bounds_of(&self.points)
    }
}

pub(crate) fn bounds_of(points: &[Point3]) -> (Point3, Point3) {
    let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        lo.z = lo.z.min(p.z);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
        hi.z = hi.z.max(p.z);
    }
    (lo, hi)
}

/// Row-major N x N_f per-point feature embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                what: "feature payload",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / cols.max(1),
                col: i % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// K x K pairwise feature distances, stored as 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    dim: usize,
    data: Vec<f32>,
}

impl SimilarityMatrix {
    /// Wraps a row-major buffer after checking symmetry, zero diagonal and non-negativity.
    pub fn from_row_major(dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::LengthMismatch {
                what: "similarity matrix",
                expected: dim * dim,
                found: data.len(),
            });
        }
        for i in 0..dim {
            if data[i * dim + i] != 0.0 {
                return Err(Error::Config(format!("similarity diagonal entry {i} is non-zero")));
            }
            for j in 0..dim {
                let v = data[i * dim + j];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if v != data[j * dim + i] {
                    return Err(Error::Config(format!("similarity matrix asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub(crate) fn from_parts_unchecked(dim: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Bytes held by the entries (4 per entry).
    pub fn byte_size(&self) -> u64 {
        modeled_matrix_bytes(self.dim)
    }
}

/// Modeled similarity-matrix footprint for K landmarks: 4 K^2 bytes.
pub const fn modeled_matrix_bytes(k: usize) -> u64 {
    4 * (k as u64) * (k as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Random,
    Grid,
    GridExtension,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Grid => "grid",
            Strategy::GridExtension => "grid-extension",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "grid" => Ok(Strategy::Grid),
            "grid-extension" | "gridext" | "grid-ext" => Ok(Strategy::GridExtension),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// K distinct indices into a parent cloud.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkSet {
    indices: Vec<usize>,
    strategy: Strategy,
    seed: u64,
}

impl LandmarkSet {
    /// Checks distinctness, range against `parent_len`, and K >= 1.
    pub fn new(indices: Vec<usize>, parent_len: usize, strategy: Strategy, seed: u64) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidLandmarkCount { k: 0, n: parent_len });
        }
        let mut seen = vec![false; parent_len];
        for &i in &indices {
            if i >= parent_len {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: parent_len,
                });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Config(format!("duplicate landmark index {i}")));
            }
        }
        Ok(Self {
            indices,
            strategy,
            seed,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Per-point instance ids, optionally with per-point category ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InstanceLabeling {
    pub labels: Vec<u32>,
    pub categories: Option<Vec<u32>>,
}

impl InstanceLabeling {
    pub fn new(labels: Vec<u32>) -> Self {
        Self {
            labels,
            categories: None,
        }
    }

    pub fn with_categories(labels: Vec<u32>, categories: Vec<u32>) -> Self {
        Self {
            labels,
            categories: Some(categories),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub(crate) fn check_len(&self, expected: usize, what: &'static str) -> Result<()> {
        let cats = self.categories.as_ref().map_or(expected, Vec::len);
        if self.labels.len() != expected || cats != expected {
            return Err(Error::LengthMismatch {
                what,
                expected,
                found: if self.labels.len() != expected {
                    self.labels.len()
                } else {
                    cats
                },
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_cloud_is_valid() {
        let c = LabeledCloud::from_points(vec![Point3::default()]);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn label_length_mismatch_is_reported() {
        let mut c = LabeledCloud::from_points(vec![Point3::default(); 5]);
        c.gt_instance = Some(vec![0; 4]);
        let v = c.violations();
        assert_eq!(
            v,
            vec![Violation::LabelLengthMismatch {
                field: "gt_instance",
                expected: 5,
                found: 4
            }]
        );
        assert!(v[0].to_string().contains("label length mismatch"));
    }

    #[test]
    fn nan_coordinate_is_reported() {
        let c = LabeledCloud::from_points(vec![Point3::new(f64::NAN, 0.0, 0.0)]);
        let v = c.violations();
        assert_eq!(v, vec![Violation::NonFiniteCoordinate { index: 0 }]);
        assert!(v[0].to_string().contains("non-finite coordinate"));
    }

    #[test]
    fn empty_cloud_is_invalid() {
        assert_eq!(LabeledCloud::default().violations(), vec![Violation::Empty]);
    }

    #[test]
    fn landmark_set_rejects_duplicates_and_out_of_range() {
        assert!(LandmarkSet::new(vec![0, 1, 1], 3, Strategy::Random, 0).is_err());
        assert!(LandmarkSet::new(vec![3], 3, Strategy::Random, 0).is_err());
        assert!(LandmarkSet::new(vec![], 3, Strategy::Random, 0).is_err());
        assert!(LandmarkSet::new(vec![2, 0], 3, Strategy::Grid, 0).is_ok());
    }

    #[test]
    fn similarity_wrapper_checks_structure() {
        assert!(SimilarityMatrix::from_row_major(2, vec![0.0, 1.0, 1.0, 0.0]).is_ok());
        assert!(SimilarityMatrix::from_row_major(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(SimilarityMatrix::from_row_major(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn feature_matrix_rejects_infinity() {
        let err = FeatureMatrix::new(1, 2, vec![0.0, f32::INFINITY]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn strategy_round_trips_through_str() {
        for s in [Strategy::Random, Strategy::Grid, Strategy::GridExtension] {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
    }
}
