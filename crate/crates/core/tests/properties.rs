//! Property tests for the cross-module invariants.

use std::collections::{BTreeSet, HashMap};

use proptest::collection::vec;
use proptest::prelude::*;

use lseg_core::blocks::{merge_labelings, partition};
use lseg_core::eval::{instance_iou, mean_average_precision, MatchConfig};
use lseg_core::labeling::{group_from_similarity, similarity_of_rows};
use lseg_core::propagation::propagate;
use lseg_core::sampling::{grid_candidates, make_grid, GridConfig, SamplerConfig};
use lseg_core::scene_io::{decode_features, encode_features, parse_cloud, CloudFormat};
use lseg_core::{
    modeled_matrix_bytes, FeatureMatrix, InstanceLabeling, LabeledCloud, LandmarkSet, Point3, SpatialIndex,
    Strategy as Sampling, UNLABELED,
};

fn point() -> impl Strategy<Value = Point3> {
    prop_oneof![
        3 => (-5.0f64..5.0, -5.0f64..5.0, 0.0f64..3.0).prop_map(|(x, y, z)| Point3::new(x, y, z)),
        // Coarse lattice: duplicates and distance ties.
        1 => (0i8..4, 0i8..4, 0i8..2).prop_map(|(x, y, z)| Point3::new(x.into(), y.into(), z.into())),
    ]
}

fn cloud(max: usize) -> impl Strategy<Value = LabeledCloud> {
    vec(point(), 1..=max).prop_map(LabeledCloud::from_points)
}

fn cloud_and_k(max: usize) -> impl Strategy<Value = (LabeledCloud, usize)> {
    cloud(max).prop_flat_map(|c| {
        let n = c.len();
        (Just(c), 1..=n)
    })
}

fn features(max_rows: usize, max_cols: usize) -> impl Strategy<Value = FeatureMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        vec(-2.0f32..2.0, r * c).prop_map(move |d| FeatureMatrix::new(r, c, d).unwrap())
    })
}

/// Canonical form of a partition: ids renumbered by first occurrence.
fn canonical(labels: &[u32]) -> Vec<u32> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            if l == UNLABELED {
                return l;
            }
            let next = map.len() as u32;
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn is_bijection(a: &[u32], b: &[u32]) -> bool {
    canonical(a) == canonical(b)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn samplers_return_k_distinct_deterministic((c, k) in cloud_and_k(600), seed in any::<u64>()) {
        for strategy in [Sampling::Random, Sampling::Grid, Sampling::GridExtension] {
            let cfg = SamplerConfig::new(strategy);
            let a = cfg.sample(&c, k, seed).unwrap();
            prop_assert_eq!(a.len(), k);
            let distinct: BTreeSet<usize> = a.indices().iter().copied().collect();
            prop_assert_eq!(distinct.len(), k);
            prop_assert!(distinct.iter().all(|&i| i < c.len()));
            let again = cfg.sample(&c, k, seed).unwrap();
            prop_assert_eq!(a.indices(), again.indices());
        }
    }

    #[test]
    fn dense_grid_with_full_neighbourhood_covers_all(c in cloud(300)) {
        let n = c.len();
        let grid = make_grid(&c, n.max(8)).unwrap();
        let index = SpatialIndex::from_points(&c.points).unwrap();
        let cfg = GridConfig { grid_points: n.max(8), nmin: n, nstep: 1 };
        let (cands, _) = grid_candidates(&index, &grid, n, &cfg);
        prop_assert_eq!(cands, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn propagation_is_voronoi((c, k) in cloud_and_k(400), seed in any::<u64>()) {
        let lm = SamplerConfig::new(Sampling::Random).sample(&c, k, seed).unwrap();
        let labels = InstanceLabeling::new((0..k as u32).map(|i| i * 3 + 1).collect());
        let out = propagate(&c, &lm, &labels).unwrap();
        let allowed: BTreeSet<u32> = labels.labels.iter().copied().collect();
        for (p, &l) in c.points.iter().zip(&out.labels) {
            prop_assert!(allowed.contains(&l));
            let j = ((l - 1) / 3) as usize;
            let d = p.dist_sq(&c.points[lm.indices()[j]]);
            let best = lm.indices().iter().map(|&i| p.dist_sq(&c.points[i])).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(d, best);
        }
    }

    #[test]
    fn full_landmark_set_is_identity(c in cloud(300), seed in any::<u64>()) {
        let n = c.len();
        let lm = SamplerConfig::new(Sampling::Random).sample(&c, n, seed).unwrap();
        // Distinct labels on distinct positions; duplicates share a label.
        let mut first: HashMap<[u64; 3], u32> = HashMap::new();
        let labels: Vec<u32> = lm
            .indices()
            .iter()
            .map(|&i| {
                let p = c.points[i];
                let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
                let next = first.len() as u32;
                *first.entry(key).or_insert(next)
            })
            .collect();
        let mut per_point = vec![0u32; n];
        for (&i, &l) in lm.indices().iter().zip(&labels) {
            per_point[i] = l;
        }
        let out = propagate(&c, &lm, &InstanceLabeling::new(labels)).unwrap();
        prop_assert_eq!(out.labels, per_point);
    }

    #[test]
    fn similarity_is_a_metric(f in features(60, 12), triples in vec((any::<prop::sample::Index>(), any::<prop::sample::Index>(), any::<prop::sample::Index>()), 20)) {
        let rows: Vec<usize> = (0..f.rows()).collect();
        let s = similarity_of_rows(&f, &rows).unwrap();
        let n = f.rows();
        for i in 0..n {
            prop_assert_eq!(s.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(s.get(i, j), s.get(j, i));
                prop_assert!(s.get(i, j) >= 0.0);
            }
        }
        for (a, b, c) in triples {
            let (i, j, k) = (a.index(n), b.index(n), c.index(n));
            prop_assert!(f64::from(s.get(i, k)) <= f64::from(s.get(i, j)) + f64::from(s.get(j, k)) + 1e-6);
        }
    }

    #[test]
    fn grouping_is_permutation_equivariant(f in features(80, 4), tau in 0.1f64..3.0, perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let n = f.rows();
        let rows: Vec<usize> = (0..n).collect();
        let mut perm = rows.clone();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let base = group_from_similarity(&similarity_of_rows(&f, &rows).unwrap(), tau, 1);
        let permuted = group_from_similarity(&similarity_of_rows(&f, &perm).unwrap(), tau, 1);
        // permuted[i] labels row perm[i]; map back to row order.
        let mut back = vec![0u32; n];
        for (i, &r) in perm.iter().enumerate() {
            back[r] = permuted.labels[i];
        }
        prop_assert!(is_bijection(&base.labels, &back));
    }

    #[test]
    fn partition_covers_every_point(c in cloud(500), size in 0.3f64..2.0, frac in 0.2f64..1.0) {
        let grid = partition(&c, size, size * frac).unwrap();
        let mut seen = vec![false; c.len()];
        for b in &grid.blocks {
            for &i in &b.member_indices {
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn merge_single_part_is_bijection(labels in vec(prop_oneof![9 => 0u32..6, 1 => Just(UNLABELED)], 1..200)) {
        let n = labels.len();
        let members: Vec<usize> = (0..n).collect();
        let l = InstanceLabeling::new(labels.clone());
        let out = merge_labelings(n, &[(&members, &l)], 0.5).unwrap();
        prop_assert!(is_bijection(&labels, &out.labels));
    }

    #[test]
    fn merge_part_order_only_renumbers(
        a in vec(0u32..4, 120),
        b in vec(0u32..4, 120),
        c in vec(0u32..4, 120),
    ) {
        // Three overlapping windows over 240 points.
        let windows: Vec<Vec<usize>> = vec![(0..120).collect(), (60..180).collect(), (120..240).collect()];
        let ls = [InstanceLabeling::new(a), InstanceLabeling::new(b), InstanceLabeling::new(c)];
        let parts: Vec<(&[usize], &InstanceLabeling)> = windows.iter().map(|w| w.as_slice()).zip(&ls).collect();
        let fwd = merge_labelings(240, &parts, 0.5).unwrap();
        let rev: Vec<_> = parts.iter().rev().copied().collect();
        let bwd = merge_labelings(240, &rev, 0.5).unwrap();
        prop_assert!(is_bijection(&fwd.labels, &bwd.labels));
    }

    #[test]
    fn map_bounds_and_renumbering(
        gt in vec(0u32..5, 1..150),
        pred in vec(prop_oneof![8 => 0u32..7, 1 => Just(UNLABELED)], 150),
        shift in 1u32..1000,
    ) {
        let n = gt.len();
        let pred = InstanceLabeling::new(pred[..n].to_vec());
        let scene = LabeledCloud {
            points: vec![Point3::default(); n],
            colors: None,
            gt_instance: Some(gt.clone()),
            gt_category: None,
        };
        let cfg = MatchConfig::default();
        let m = mean_average_precision(&pred, &scene, &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
        prop_assert_eq!(mean_average_precision(&InstanceLabeling::new(gt.clone()), &scene, &cfg).unwrap(), 1.0);
        // Reverse-and-shift is a bijection on ids.
        let renumber = |v: &[u32]| v.iter().map(|&x| if x == UNLABELED { x } else { (1000 - x) * 7 + shift }).collect::<Vec<u32>>();
        let scene2 = LabeledCloud { gt_instance: Some(renumber(&gt)), ..scene.clone() };
        let pred2 = InstanceLabeling::new(renumber(&pred.labels));
        prop_assert_eq!(mean_average_precision(&pred2, &scene2, &cfg).unwrap(), m);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in vec(0usize..50, 1..40), b in vec(0usize..50, 1..40)) {
        let x = instance_iou(&a, &b).unwrap();
        prop_assert_eq!(x, instance_iou(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn fsim_round_trip(f in features(20, 8)) {
        prop_assert_eq!(decode_features(&encode_features(&f)).unwrap(), f);
    }

    #[test]
    fn cloud_round_trip_both_formats(
        pts in vec((-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3), 1..60),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = pts.len();
        let c = LabeledCloud {
            points: pts.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect(),
            colors: Some((0..n).map(|_| [r.random(), r.random(), r.random()]).collect()),
            gt_instance: Some((0..n).map(|_| r.random()).collect()),
            gt_category: Some((0..n).map(|_| r.random_range(0..9)).collect()),
        };
        let dir = tempfile::tempdir().unwrap();
        for (name, fmt) in [("c.ply", CloudFormat::PlyAscii), ("c.csv", CloudFormat::Csv)] {
            let p = dir.path().join(name);
            lseg_core::scene_io::write_cloud(&c, &p, fmt).unwrap();
            let back = parse_cloud(&std::fs::read_to_string(&p).unwrap(), fmt).unwrap();
            prop_assert_eq!(&back, &c);
        }
    }

    #[test]
    fn matrix_bytes_quarter_on_halving(k in 1usize..20_000) {
        prop_assert_eq!(modeled_matrix_bytes(k) * 4, modeled_matrix_bytes(2 * k));
        prop_assert_eq!(modeled_matrix_bytes(k), 4 * (k as u64) * (k as u64));
    }
}

#[test]
fn landmark_set_invariant_is_checked_on_construction() {
    assert!(LandmarkSet::new(vec![0, 0], 2, Sampling::Random, 0).is_err());
    assert!(LandmarkSet::new(vec![2], 2, Sampling::Random, 0).is_err());
}

/// Propagation cost grows far slower than K.
#[test]
fn propagation_time_is_sublinear_in_k() {
    use rand::{Rng, SeedableRng};
    use std::time::Instant;
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let c = LabeledCloud::from_points((0..4096).map(|_| Point3::new(r.random(), r.random(), r.random())).collect());
    let time = |k: usize| {
        let lm = SamplerConfig::new(Sampling::Random).sample(&c, k, 1).unwrap();
        let labels = InstanceLabeling::new(vec![0; k]);
        let mut runs: Vec<f64> = (0..9)
            .map(|_| {
                let t = Instant::now();
                std::hint::black_box(propagate(&c, &lm, &labels).unwrap());
                t.elapsed().as_secs_f64()
            })
            .collect();
        runs.sort_by(f64::total_cmp);
        runs[4]
    };
    let (small, large) = (time(512), time(2048));
    assert!(large <= 3.0 * small, "K=2048 {large}s vs K=512 {small}s");
}
