//! Scoring and K-sweeps.

mod metrics;
mod pipeline;
mod report;

pub use metrics::{instance_iou, mean_average_precision, MatchConfig};
pub use pipeline::{run_pipeline, segment_scene, PipelineConfig, PipelineOutput, PropagationMode, Segmentation};
pub use report::{emit_report, read_records_csv, render_svg, write_records_csv, Metric, ReportPaths};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::types::{FeatureMatrix, LabeledCloud, Strategy};

/// One (strategy, K, repeat) cell. Field order matches the report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub scene: String,
    pub strategy: Strategy,
    #[serde(rename = "K")]
    pub k: usize,
    pub repeat: usize,
    pub seed: u64,
    pub map: f64,
    pub wall_seconds: f64,
    pub matrix_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub scene: String,
    pub records: Vec<SweepRecord>,
    /// Free-form machine and time note.
    pub environment: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub strategies: Vec<Strategy>,
    /// Strictly ascending.
    pub k_list: Vec<usize>,
    pub repeats: usize,
    /// Template for every cell; its `seed` is the base seed and its
    /// strategy and K are overwritten per cell.
    pub base: PipelineConfig,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_list.is_empty() {
            return Err(Error::Config("K list is empty".into()));
        }
        if self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("K list must be strictly ascending, got {:?}", self.k_list)));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no sampling strategies given".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        Ok(())
    }
}

/// Seed of repeat `r`, shared by every strategy and K within that repeat.
pub fn repeat_seed(base: u64, repeat: usize) -> u64 {
    derive_seed(base, &[repeat as u64])
}

/// Runs every (strategy, K, repeat) cell in that nesting order.
///
/// Cells run one after another and each pipeline parallelises internally,
/// so recorded wall times are not inflated by competing cells.
pub fn sweep(scene_id: &str, scene: &LabeledCloud, cfg: &SweepConfig, features: Option<&FeatureMatrix>) -> Result<SweepReport> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.strategies.len() * cfg.k_list.len() * cfg.repeats);
    for &strategy in &cfg.strategies {
        for &k in &cfg.k_list {
            for repeat in 0..cfg.repeats {
                let mut cell = cfg.base;
                cell.sampler.strategy = strategy;
                cell.k = k;
                cell.seed = repeat_seed(cfg.base.seed, repeat);
                let mut out = run_pipeline(scene_id, scene, &cell, features)?;
                out.record.repeat = repeat;
                records.push(out.record);
            }
        }
    }
    Ok(SweepReport {
        scene: scene_id.to_string(),
        records,
        environment: environment_note(),
    })
}

pub fn environment_note() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    format!(
        "{}-{}, {} worker threads, unix time {secs}",
        std::env::consts::OS,
        std::env::consts::ARCH,
        crate::par::current_threads()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::LabelerKind;
    use crate::scene_io::{generate_scene, office_preset};

    fn tiny_scene() -> LabeledCloud {
        let mut spec = office_preset(5);
        spec.floor_density = 40.0;
        spec.wall_density = Some(40.0);
        spec.furniture.iter_mut().for_each(|f| f.density = 40.0);
        generate_scene(&spec).unwrap()
    }

    fn cfg(strategies: Vec<Strategy>, k_list: Vec<usize>, repeats: usize) -> SweepConfig {
        let mut base = PipelineConfig::new(Strategy::Random, 1, LabelerKind::Oracle, 9);
        base.block_points = 256;
        SweepConfig {
            strategies,
            k_list,
            repeats,
            base,
        }
    }

    #[test]
    fn record_counts() {
        let scene = tiny_scene();
        let one = sweep("t", &scene, &cfg(vec![Strategy::Random], vec![64], 1), None).unwrap();
        assert_eq!(one.records.len(), 1);
        let c = cfg(vec![Strategy::Random, Strategy::Grid], vec![16, 32, 64, 128, 256], 2);
        let r = sweep("t", &scene, &c, None).unwrap();
        assert_eq!(r.records.len(), 20);
        assert!(r.records.iter().all(|x| x.matrix_bytes == 4 * (x.k as u64).pow(2)));
        assert!(r.records.iter().all(|x| (0.0..=1.0).contains(&x.map)));
    }

    #[test]
    fn reruns_reproduce_map() {
        let scene = tiny_scene();
        let c = cfg(vec![Strategy::GridExtension], vec![32, 64], 3);
        let a = sweep("t", &scene, &c, None).unwrap();
        let b = sweep("t", &scene, &c, None).unwrap();
        let strip = |r: &SweepReport| -> Vec<(usize, usize, u64, f64)> {
            r.records.iter().map(|x| (x.k, x.repeat, x.seed, x.map)).collect()
        };
        assert_eq!(strip(&a), strip(&b));
        let seeds: std::collections::HashSet<u64> = a.records.iter().map(|x| x.seed).collect();
        assert_eq!(seeds.len(), 3);
    }

    #[test]
    fn bad_k_lists() {
        let scene = tiny_scene();
        for k in [vec![], vec![64, 32], vec![32, 32]] {
            assert!(matches!(
                sweep("t", &scene, &cfg(vec![Strategy::Random], k, 1), None),
                Err(Error::Config(_))
            ));
        }
    }
}
