//! `lseg`: generate scenes, segment them, sweep K and score results.
//!
//! Exit status: 0 on success, 2 for usage or configuration errors, 1 for
//! any other failure.

mod args;

use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::Parser;

use lseg_core::eval::{
    emit_report, mean_average_precision, segment_scene, sweep, write_records_csv, MatchConfig, PipelineConfig,
    PropagationMode, ReportPaths, SweepConfig,
};
use lseg_core::labeling::LabelerKind;
use lseg_core::scene_io::{
    generate_scene, office_preset, read_cloud, read_features, read_features_header, read_labels,
    synthetic_features, write_cloud, write_features, write_labels, CloudFormat, FeatureNoise, SceneSpec,
};
use lseg_core::{Error, FeatureMatrix, LabeledCloud, Strategy};

use args::*;

/// Marks an error as a usage problem (exit status 2).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn is_usage(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<Usage>()
            || matches!(
                e.downcast_ref::<Error>(),
                Some(Error::Config(_) | Error::InvalidLandmarkCount { .. })
            )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 && !lseg_core::par::configure_threads(cli.threads) {
        eprintln!("warning: thread pool already initialised; --threads ignored");
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 2 } else { 1 })
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::GenScene(a) => gen_scene(a),
        Command::Segment(a) => segment(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Eval(a) => eval(a),
        Command::FeaturesInfo(a) => {
            let (rows, cols) = read_features_header(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
            println!("rows={rows} cols={cols}");
            Ok(())
        }
    }
}

fn format_for(path: &Path, explicit: Option<Format>) -> anyhow::Result<CloudFormat> {
    match explicit {
        Some(Format::Ply) => Ok(CloudFormat::PlyAscii),
        Some(Format::Csv) => Ok(CloudFormat::Csv),
        None => CloudFormat::from_path(path)
            .ok_or_else(|| usage(format!("cannot tell the format of {} (use .ply or .csv)", path.display()))),
    }
}

fn load_scene(path: &Path) -> anyhow::Result<LabeledCloud> {
    let fmt = format_for(path, None)?;
    read_cloud(path, fmt).with_context(|| format!("reading {}", path.display()))
}

fn gen_scene(a: GenSceneArgs) -> anyhow::Result<()> {
    let mut spec: SceneSpec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("bad scene spec {}: {e}", p.display())))?
        }
        None => match a.preset {
            Preset::Office => office_preset(a.seed),
        },
    };
    spec.seed = a.seed;
    if let Some(d) = a.density {
        spec.floor_density = d;
        if spec.wall_density.is_some() {
            spec.wall_density = Some(d);
        }
        spec.furniture.iter_mut().for_each(|f| f.density = d);
    }
    let fmt = format_for(&a.output, a.format)?;
    let cloud = generate_scene(&spec)?;
    write_cloud(&cloud, &a.output, fmt).with_context(|| format!("writing {}", a.output.display()))?;
    if let Some(fp) = &a.features_out {
        let model = FeatureNoise {
            dim: a.feature_dim,
            noise: a.feature_noise,
            ..FeatureNoise::default()
        };
        let f = synthetic_features(&cloud, model, a.seed)?;
        write_features(&f, fp).with_context(|| format!("writing {}", fp.display()))?;
    }
    let instances = cloud
        .gt_instance
        .as_ref()
        .map_or(0, |g| g.iter().collect::<std::collections::BTreeSet<_>>().len());
    println!("{} points, {instances} instances -> {}", cloud.len(), a.output.display());
    Ok(())
}

fn strategy(s: StrategyArg) -> Strategy {
    match s {
        StrategyArg::Random => Strategy::Random,
        StrategyArg::Grid => Strategy::Grid,
        StrategyArg::GridExtension => Strategy::GridExtension,
    }
}

/// Builds the pipeline template and loads the feature file if one is given.
fn pipeline(p: &PipelineArgs, strat: Strategy, k: usize, scene_n: usize) -> anyhow::Result<(PipelineConfig, Option<FeatureMatrix>)> {
    let kind = match p.labeler {
        LabelerArg::Similarity => LabelerKind::Similarity,
        LabelerArg::Oracle => LabelerKind::Oracle,
        LabelerArg::GroundTruth => LabelerKind::GroundTruth,
    };
    let mut cfg = PipelineConfig::new(strat, k, kind, p.seed);
    cfg.block_size = p.block_size;
    cfg.stride = p.stride;
    cfg.block_points = p.block_points;
    cfg.sampler.grid.grid_points = p.grid_points;
    cfg.sampler.grid.nmin = p.nmin;
    cfg.sampler.grid.nstep = p.nstep;
    cfg.sampler.grid_ext.initial_grid = p.initial_grid;
    cfg.sampler.grid_ext.growth_factor = p.growth_factor;
    cfg.labeler.tau = p.tau;
    cfg.labeler.radius = p.radius;
    cfg.labeler.min_group = p.min_group;
    cfg.propagation = match p.propagation {
        PropagationArg::Euclidean => PropagationMode::Euclidean,
        PropagationArg::Feature => PropagationMode::Feature,
    };
    cfg.merge_threshold = p.merge_threshold;
    cfg.matching = MatchConfig {
        iou_threshold: p.iou,
        category_aware: match p.categories {
            CategoryMode::Auto => None,
            CategoryMode::On => Some(true),
            CategoryMode::Off => Some(false),
        },
    };
    let needs_features = kind == LabelerKind::Similarity || cfg.propagation == PropagationMode::Feature;
    if needs_features && p.features.is_none() {
        return Err(usage("--features is required with --labeler similarity or --propagation feature"));
    }
    cfg.validate()?;
    let features = match &p.features {
        Some(path) => {
            let f = read_features(path).with_context(|| format!("reading {}", path.display()))?;
            if f.rows() != scene_n {
                return Err(usage(format!(
                    "{} has {} rows but the scene has {scene_n} points",
                    path.display(),
                    f.rows()
                )));
            }
            Some(f)
        }
        None => None,
    };
    Ok((cfg, features))
}

fn scene_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scene".into(), |s| s.to_string_lossy().into_owned())
}

fn segment(a: SegmentArgs) -> anyhow::Result<()> {
    let scene = load_scene(&a.scene)?;
    let (cfg, features) = pipeline(&a.pipeline, strategy(a.strategy), a.k, scene.len())?;
    let seg = segment_scene(&scene, &cfg, features.as_ref())?;
    write_labels(&seg.labeling, &a.labels_out).with_context(|| format!("writing {}", a.labels_out.display()))?;
    let instances = seg
        .labeling
        .labels
        .iter()
        .filter(|&&l| l != lseg_core::UNLABELED)
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    println!(
        "{} points, {} blocks, {instances} instances, {:.3}s -> {}",
        scene.len(),
        seg.blocks,
        seg.elapsed.as_secs_f64(),
        a.labels_out.display()
    );
    if scene.gt_instance.is_some() {
        let map = mean_average_precision(&seg.labeling, &scene, &cfg.matching)?;
        let record = lseg_core::eval::SweepRecord {
            scene: scene_id(&a.scene),
            strategy: cfg.sampler.strategy,
            k: cfg.k,
            repeat: 0,
            seed: cfg.seed,
            map,
            wall_seconds: seg.elapsed.as_secs_f64(),
            matrix_bytes: lseg_core::modeled_matrix_bytes(cfg.k),
        };
        write_records_csv(std::slice::from_ref(&record), &a.report_out)
            .with_context(|| format!("writing {}", a.report_out.display()))?;
        println!("mAP {map:.4} -> {}", a.report_out.display());
    } else {
        eprintln!("note: scene has no ground truth; no report written");
    }
    if let Some(path) = &a.export_ply {
        let colored = LabeledCloud {
            points: scene.points.clone(),
            colors: Some(seg.labeling.labels.iter().map(|&l| instance_color(l)).collect()),
            gt_instance: Some(seg.labeling.labels.clone()),
            gt_category: None,
        };
        write_cloud(&colored, path, CloudFormat::PlyAscii).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn instance_color(label: u32) -> [u8; 3] {
    if label == lseg_core::UNLABELED {
        return [0, 0, 0];
    }
    // Spread ids over the hue circle with the golden ratio.
    let h = (f64::from(label) * 0.618_033_988_75).fract() * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let c = |v: f64| (40.0 + v * 215.0) as u8;
    [c(r), c(g), c(b)]
}

fn run_sweep(a: SweepArgs) -> anyhow::Result<()> {
    if a.k_list.is_empty() {
        return Err(usage("--k-list is empty"));
    }
    let scene = load_scene(&a.scene)?;
    let first_k = a.k_list[0];
    let (base, features) = pipeline(&a.pipeline, Strategy::Random, first_k, scene.len())?;
    let cfg = SweepConfig {
        strategies: a.strategies.iter().map(|&s| strategy(s)).collect(),
        k_list: a.k_list.clone(),
        repeats: a.repeats,
        base,
    };
    cfg.validate()?;
    if let Some(&k) = cfg.k_list.iter().find(|&&k| k > base.block_points) {
        return Err(usage(format!("K = {k} exceeds --block-points {}", base.block_points)));
    }
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let report = sweep(&scene_id(&a.scene), &scene, &cfg, features.as_ref())?;
    let paths = ReportPaths::in_dir(&a.out_dir);
    emit_report(&report, &paths)?;
    for r in &report.records {
        println!(
            "{:<15} K={:<5} repeat={} mAP={:.4} {:.3}s",
            r.strategy.as_str(),
            r.k,
            r.repeat,
            r.map,
            r.wall_seconds
        );
    }
    println!("{} records -> {}", report.records.len(), paths.csv.display());
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let scene = load_scene(&a.scene)?;
    if scene.gt_instance.is_none() {
        return Err(anyhow!(Error::MissingGroundTruth)).context(format!("{}", a.scene.display()));
    }
    let labels = read_labels(&a.labels).with_context(|| format!("reading {}", a.labels.display()))?;
    let cfg = MatchConfig {
        iou_threshold: a.iou,
        category_aware: Some(false),
    };
    let map = mean_average_precision(&labels, &scene, &cfg)?;
    println!("mAP {map:.6}");
    Ok(())
}
