//! End-to-end run: partition, resample, sample, label, propagate, merge, score.

use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::blocks::{merge_blocks, partition, resample_block, BlockGrid, ResampledBlock, MERGE_THRESHOLD};
use crate::error::{Error, Result};
use crate::eval::metrics::{mean_average_precision, MatchConfig};
use crate::eval::SweepRecord;
use crate::labeling::{Labeler, LabelerConfig, LabelerKind};
use crate::par;
use crate::propagation::{propagate_features_to, propagate_to};
use crate::rng::derive_seed;
use crate::sampling::SamplerConfig;
use crate::types::{modeled_matrix_bytes, FeatureMatrix, InstanceLabeling, LabeledCloud, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagationMode {
    #[default]
    Euclidean,
    Feature,
}

impl FromStr for PropagationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "feature" | "feature-space" => Ok(Self::Feature),
            other => Err(Error::Config(format!("unknown propagation mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub block_size: f64,
    pub stride: f64,
    /// Points per resampled block.
    pub block_points: usize,
    pub sampler: SamplerConfig,
    /// Landmarks per block.
    pub k: usize,
    pub labeler: LabelerConfig,
    pub propagation: PropagationMode,
    pub merge_threshold: f64,
    pub matching: MatchConfig,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(strategy: Strategy, k: usize, labeler: LabelerKind, seed: u64) -> Self {
        Self {
            block_size: 1.0,
            stride: 0.5,
            block_points: 4096,
            sampler: SamplerConfig::new(strategy),
            k,
            labeler: LabelerConfig::new(labeler),
            propagation: PropagationMode::Euclidean,
            merge_threshold: MERGE_THRESHOLD,
            matching: MatchConfig::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.block_points {
            return Err(Error::InvalidLandmarkCount {
                k: self.k,
                n: self.block_points,
            });
        }
        if !(self.merge_threshold > 0.0 && self.merge_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "merge threshold must lie in (0, 1], got {}",
                self.merge_threshold
            )));
        }
        self.sampler.grid.validate()?;
        self.sampler.grid_ext.validate()?;
        self.labeler.validate()?;
        self.matching.validate()
    }
}

/// Result of segmenting one scene, before scoring.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub labeling: InstanceLabeling,
    /// Sampling, labeling, propagation and merging; excludes partitioning
    /// and resampling.
    pub elapsed: Duration,
    pub blocks: usize,
}

/// Segments `scene`. `features`, when given, must have one row per scene
/// point; they are required by the similarity labeler and by feature-space
/// propagation.
///
/// Landmark labels are propagated to every member of the block, not only
/// to the resampled points, so the merged labeling covers the whole scene.
pub fn segment_scene(scene: &LabeledCloud, cfg: &PipelineConfig, features: Option<&FeatureMatrix>) -> Result<Segmentation> {
    cfg.validate()?;
    scene.validate()?;
    if let Some(f) = features {
        if f.rows() != scene.len() {
            return Err(Error::LengthMismatch {
                what: "feature rows",
                expected: scene.len(),
                found: f.rows(),
            });
        }
    }
    let feature_mode = match (cfg.propagation, features) {
        (PropagationMode::Feature, None) => {
            return Err(Error::Config("feature-space propagation needs a feature matrix".into()))
        }
        (PropagationMode::Feature, Some(f)) => Some(f),
        (PropagationMode::Euclidean, _) => None,
    };
    let labeler = cfg.labeler.build(features)?;

    let grid = partition(scene, cfg.block_size, cfg.stride)?;
    let resampled: Vec<ResampledBlock> = par::map_range(grid.blocks.len(), |b| {
        resample_block(&grid.blocks[b], scene, cfg.block_points, derive_seed(cfg.seed, &[b as u64, 0]))
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let start = Instant::now();
    let per_block = par::map_range(grid.blocks.len(), |b| {
        label_block(scene, &grid, &resampled[b], b, cfg, labeler.as_ref(), feature_mode)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let labeling = merge_blocks(&grid, &per_block, cfg.merge_threshold)?;
    Ok(Segmentation {
        labeling,
        elapsed: start.elapsed(),
        blocks: grid.blocks.len(),
    })
}

fn label_block(
    scene: &LabeledCloud,
    grid: &BlockGrid,
    block: &ResampledBlock,
    b: usize,
    cfg: &PipelineConfig,
    labeler: &dyn Labeler,
    feature_mode: Option<&FeatureMatrix>,
) -> Result<InstanceLabeling> {
    let landmarks = cfg
        .sampler
        .sample(&block.cloud, cfg.k, derive_seed(cfg.seed, &[b as u64, 1]))?;
    let landmark_labels = labeler.label(block, &landmarks)?;
    let in_scene: Vec<usize> = landmarks.indices().iter().map(|&i| block.source[i]).collect();
    let members = &grid.blocks[b].member_indices;
    match feature_mode {
        Some(f) => propagate_features_to(f, &in_scene, &landmark_labels, members),
        None => propagate_to(&scene.points, &in_scene, &landmark_labels, members),
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub labeling: InstanceLabeling,
    pub record: SweepRecord,
}

/// Segments and scores one scene. The record's `repeat` is 0.
pub fn run_pipeline(
    scene_id: &str,
    scene: &LabeledCloud,
    cfg: &PipelineConfig,
    features: Option<&FeatureMatrix>,
) -> Result<PipelineOutput> {
    if scene.gt_instance.is_none() {
        return Err(Error::MissingGroundTruth);
    }
    let seg = segment_scene(scene, cfg, features)?;
    let map = mean_average_precision(&seg.labeling, scene, &cfg.matching)?;
    Ok(PipelineOutput {
        record: SweepRecord {
            scene: scene_id.to_string(),
            strategy: cfg.sampler.strategy,
            k: cfg.k,
            repeat: 0,
            seed: cfg.seed,
            map,
            wall_seconds: seg.elapsed.as_secs_f64(),
            matrix_bytes: modeled_matrix_bytes(cfg.k),
        },
        labeling: seg.labeling,
    })
}
