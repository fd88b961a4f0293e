use std::path::Path;
use std::process::{Command, Output};

fn lseg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lseg"))
        .args(args)
        .current_dir(dir)
        .env_remove("LSEG_THREADS")
        .output()
        .expect("run lseg")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// A light office scene plus features, written into `dir`.
fn scene(dir: &Path) {
    ok(&lseg(
        &["gen-scene", "--preset", "office", "--seed", "1", "--density", "50", "-o", "scene.ply", "--features-out", "scene.fsim"],
        dir,
    ));
}

const SMALL: &[&str] = &["--block-points", "256"];

#[test]
fn gen_scene_is_deterministic_and_labeled() {
    let d = tempfile::tempdir().unwrap();
    ok(&lseg(&["gen-scene", "--preset", "office", "--seed", "1", "-o", "a.ply"], d.path()));
    ok(&lseg(&["gen-scene", "--preset", "office", "--seed", "1", "-o", "b.ply"], d.path()));
    let a = std::fs::read(d.path().join("a.ply")).unwrap();
    assert_eq!(a, std::fs::read(d.path().join("b.ply")).unwrap());
    let cloud = lseg_core::scene_io::read_cloud(d.path().join("a.ply"), lseg_core::scene_io::CloudFormat::PlyAscii).unwrap();
    let cats: std::collections::BTreeSet<u32> = cloud.gt_category.unwrap().into_iter().collect();
    assert!(cats.len() >= 2, "{cats:?}");
}

#[test]
fn gen_scene_from_json_spec() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("room.json"),
        r#"{"extents":[2,2,2],"floor_density":30,"furniture":[{"category":2,"min":[0.5,0.5,0.7],"max":[1.5,1.2,0.75],"density":30}]}"#,
    )
    .unwrap();
    let out = ok(&lseg(&["gen-scene", "--spec", "room.json", "-o", "room.csv"], d.path()));
    assert!(out.contains("2 instances"), "{out}");
}

#[test]
fn negative_density_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let out = lseg(&["gen-scene", "--density", "-5", "-o", "x.ply"], d.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn segment_writes_labels_for_every_point() {
    let d = tempfile::tempdir().unwrap();
    scene(d.path());
    let mut args = vec!["segment", "scene.ply", "--strategy", "random", "--k", "128", "--labeler", "oracle", "--seed", "7"];
    args.extend(SMALL);
    args.extend(["--export-ply", "pred.ply"]);
    let out = ok(&lseg(&args, d.path()));
    assert!(out.contains("mAP"), "{out}");
    let labels = lseg_core::scene_io::read_labels(d.path().join("labels.csv")).unwrap();
    let cloud = lseg_core::scene_io::read_cloud(d.path().join("scene.ply"), lseg_core::scene_io::CloudFormat::PlyAscii).unwrap();
    assert_eq!(labels.len(), cloud.len());
    let records = lseg_core::eval::read_records_csv(d.path().join("report.csv")).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].k, 128);
    assert!(d.path().join("pred.ply").exists());

    // The eval subcommand rescoring the same labels agrees with the report.
    let out = ok(&lseg(&["eval", "scene.ply", "labels.csv"], d.path()));
    let map: f64 = out.trim().trim_start_matches("mAP ").parse().unwrap();
    assert!((map - records[0].map).abs() < 1e-6, "{map} vs {}", records[0].map);
}

#[test]
fn grid_strategy_and_similarity_labeler() {
    let d = tempfile::tempdir().unwrap();
    scene(d.path());
    let mut args = vec![
        "segment", "scene.ply", "--strategy", "grid", "--grid-points", "2048", "--k", "128", "--labeler", "similarity",
        "--features", "scene.fsim", "--tau", "0.5",
    ];
    args.extend(SMALL);
    ok(&lseg(&args, d.path()));
}

#[test]
fn similarity_without_features_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    scene(d.path());
    let out = lseg(&["segment", "scene.ply", "--labeler", "similarity"], d.path());
    assert_eq!(out.status.code(), Some(2));
    let out = lseg(&["segment", "scene.ply", "--k", "9000"], d.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_record_count_and_determinism() {
    let d = tempfile::tempdir().unwrap();
    scene(d.path());
    let run = |out_dir: &str| {
        let mut args = vec![
            "sweep", "scene.ply", "--k-list", "16,32,64,128,256", "--strategies", "random,grid", "--repeats", "3",
            "--seed", "9", "--out-dir", out_dir,
        ];
        args.extend(SMALL);
        ok(&lseg(&args, d.path()));
        lseg_core::eval::read_records_csv(d.path().join(out_dir).join("records.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a.len(), 30);
    assert!(d.path().join("a/map_vs_k.svg").exists());
    assert!(d.path().join("a/seconds_vs_k.svg").exists());
    let b = run("b");
    let maps = |r: &[lseg_core::eval::SweepRecord]| r.iter().map(|x| x.map).collect::<Vec<_>>();
    assert_eq!(maps(&a), maps(&b));
}

#[test]
fn empty_k_list_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    scene(d.path());
    assert_eq!(lseg(&["sweep", "scene.ply", "--k-list", ""], d.path()).status.code(), Some(2));
    assert_eq!(lseg(&["sweep", "scene.ply", "--k-list", "64,32"], d.path()).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_one() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(lseg(&["segment", "missing.ply"], d.path()).status.code(), Some(1));
    std::fs::write(d.path().join("bad.fsim"), b"FSIX\0\0\0\0").unwrap();
    assert_eq!(lseg(&["features-info", "bad.fsim"], d.path()).status.code(), Some(1));
}

#[test]
fn features_info_prints_header() {
    let d = tempfile::tempdir().unwrap();
    scene(d.path());
    let out = ok(&lseg(&["features-info", "scene.fsim"], d.path()));
    assert!(out.starts_with("rows=") && out.trim().ends_with("cols=16"), "{out}");
}

#[test]
fn help_lists_defaults() {
    let d = tempfile::tempdir().unwrap();
    for sub in ["gen-scene", "segment", "sweep", "eval", "features-info"] {
        let out = ok(&lseg(&[sub, "--help"], d.path()));
        assert!(out.contains("Usage"), "{sub}: {out}");
    }
    let out = ok(&lseg(&["segment", "--help"], d.path()));
    for flag in ["--k <K>", "[default: 2048]", "--grid-points", "--threads", "[env: LSEG_THREADS=]"] {
        assert!(out.contains(flag), "missing {flag}:\n{out}");
    }
}
