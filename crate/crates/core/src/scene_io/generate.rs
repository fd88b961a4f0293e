//! Synthetic indoor scenes with ground-truth instances.
//!
//! A room is a floor rectangle at z = 0, optionally four walls, and a set
//! of axis-aligned furniture boxes. Each surface receives
//! Poisson(density x area) points placed uniformly on it. Instance ids:
//! floor 0, walls 1..=4 when present, then one per furniture item in
//! listed order.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng as SceneRng};
use crate::types::{FeatureMatrix, LabeledCloud, Point3, UNLABELED};

pub mod category {
    pub const FLOOR: u32 = 0;
    pub const WALL: u32 = 1;
    pub const TABLE: u32 = 2;
    pub const CHAIR: u32 = 3;
    pub const BOOKCASE: u32 = 4;
    pub const CABINET: u32 = 5;

    pub fn color(category: u32) -> [u8; 3] {
        match category {
            FLOOR => [150, 140, 120],
            WALL => [210, 210, 200],
            TABLE => [160, 100, 50],
            CHAIR => [40, 90, 170],
            BOOKCASE => [110, 60, 30],
            CABINET => [90, 140, 90],
            _ => [128, 128, 128],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurnitureItem {
    pub category: u32,
    pub min: [f64; 3],
    pub max: [f64; 3],
    /// Points per square meter of box surface.
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Room size along x, y, z in meters; the room spans `[0, extent]`.
    pub extents: [f64; 3],
    pub floor_density: f64,
    /// `None` leaves the room without walls.
    #[serde(default)]
    pub wall_density: Option<f64>,
    #[serde(default)]
    pub furniture: Vec<FurnitureItem>,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.extents.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return bad(format!("room extents must be positive, got {:?}", self.extents));
        }
        let dens_ok = |d: f64| d > 0.0 && d.is_finite();
        if !dens_ok(self.floor_density) {
            return bad(format!("floor density must be positive, got {}", self.floor_density));
        }
        if let Some(d) = self.wall_density {
            if !dens_ok(d) {
                return bad(format!("wall density must be positive, got {d}"));
            }
        }
        for (i, f) in self.furniture.iter().enumerate() {
            if !dens_ok(f.density) {
                return bad(format!("furniture {i}: density must be positive, got {}", f.density));
            }
            for a in 0..3 {
                if !(f.min[a] < f.max[a]) || f.min[a] < 0.0 || f.max[a] > self.extents[a] {
                    return bad(format!("furniture {i}: box must lie inside the room with positive size"));
                }
            }
        }
        Ok(())
    }
}

/// One planar rectangle: `origin + s * u + t * v` for s, t in [0, 1].
struct Face {
    origin: [f64; 3],
    u: [f64; 3],
    v: [f64; 3],
}

impl Face {
    fn area(&self) -> f64 {
        let n = |a: [f64; 3]| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        n(self.u) * n(self.v)
    }

    fn sample(&self, rng: &mut SceneRng) -> Point3 {
        let s: f64 = rng.random();
        let t: f64 = rng.random();
        let c = |a: usize| self.origin[a] + s * self.u[a] + t * self.v[a];
        Point3::new(c(0), c(1), c(2))
    }
}

/// Axis-aligned rectangle lying in the plane `axis = value`.
fn axis_face(axis: usize, value: f64, lo: [f64; 3], hi: [f64; 3]) -> Face {
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut origin = lo;
    origin[axis] = value;
    let mut u = [0.0; 3];
    let mut v = [0.0; 3];
    u[a] = hi[a] - lo[a];
    v[b] = hi[b] - lo[b];
    Face { origin, u, v }
}

fn box_faces(lo: [f64; 3], hi: [f64; 3]) -> Vec<Face> {
    (0..3)
        .flat_map(|axis| [axis_face(axis, lo[axis], lo, hi), axis_face(axis, hi[axis], lo, hi)])
        .collect()
}

pub fn generate_scene(spec: &SceneSpec) -> Result<LabeledCloud> {
    spec.validate()?;
    let [w, l, h] = spec.extents;
    let mut surfaces: Vec<(u32, u32, f64, Vec<Face>)> = Vec::new();
    surfaces.push((
        0,
        category::FLOOR,
        spec.floor_density,
        vec![axis_face(2, 0.0, [0.0; 3], [w, l, 0.0])],
    ));
    let mut next_id = 1u32;
    if let Some(d) = spec.wall_density {
        let room = [w, l, h];
        for face in [
            axis_face(0, 0.0, [0.0; 3], room),
            axis_face(0, w, [0.0; 3], room),
            axis_face(1, 0.0, [0.0; 3], room),
            axis_face(1, l, [0.0; 3], room),
        ] {
            surfaces.push((next_id, category::WALL, d, vec![face]));
            next_id += 1;
        }
    }
    for f in &spec.furniture {
        surfaces.push((next_id, f.category, f.density, box_faces(f.min, f.max)));
        next_id += 1;
    }

    let mut rng = rng_from_seed(spec.seed);
    let mut cloud = LabeledCloud {
        colors: Some(Vec::new()),
        gt_instance: Some(Vec::new()),
        gt_category: Some(Vec::new()),
        ..LabeledCloud::default()
    };
    for (instance, cat, density, faces) in &surfaces {
        for face in faces {
            let mean = density * face.area();
            if mean <= 0.0 {
                continue;
            }
            let count = Poisson::new(mean)
                .map_err(|e| Error::Config(format!("poisson mean {mean}: {e}")))?
                .sample(&mut rng) as usize;
            for _ in 0..count {
                cloud.points.push(face.sample(&mut rng));
            }
            cloud.colors.as_mut().expect("colors").extend(std::iter::repeat_n(category::color(*cat), count));
            cloud.gt_instance.as_mut().expect("instances").extend(std::iter::repeat_n(*instance, count));
            cloud.gt_category.as_mut().expect("categories").extend(std::iter::repeat_n(*cat, count));
        }
    }
    if cloud.is_empty() {
        return Err(Error::Empty("generated scene"));
    }
    Ok(cloud)
}

/// Office scene with floor, walls, two tables, four chairs, a bookcase and a
/// cabinet. Furniture is lifted off the floor and kept at least 0.3 m from
/// walls and from each other, so every instance is spatially separated.
/// The layout varies with `seed`.
pub fn office_preset(seed: u64) -> SceneSpec {
    const DENSITY: f64 = 400.0;
    const CLEARANCE: f64 = 0.3;
    let extents = [4.0, 3.0, 2.5];
    let mut rng = rng_from_seed(seed ^ 0x0FF1CE);
    // (category, footprint x, footprint y, z range)
    let catalogue = [
        (category::TABLE, 1.2, 0.7, (0.70, 0.76)),
        (category::TABLE, 1.2, 0.7, (0.70, 0.76)),
        (category::CHAIR, 0.45, 0.45, (0.40, 0.85)),
        (category::CHAIR, 0.45, 0.45, (0.40, 0.85)),
        (category::CHAIR, 0.45, 0.45, (0.40, 0.85)),
        (category::CHAIR, 0.45, 0.45, (0.40, 0.85)),
        (category::BOOKCASE, 1.0, 0.35, (0.25, 1.90)),
        (category::CABINET, 0.5, 0.5, (0.25, 0.90)),
    ];
    // Place items in order; if one does not fit, restart the whole layout.
    let mut furniture: Vec<FurnitureItem> = Vec::new();
    'layout: loop {
        furniture.clear();
        for &(cat, fx, fy, (z0, z1)) in &catalogue {
            let placed = (0..200).find_map(|_| {
                let (sx, sy) = if rng.random::<bool>() { (fx, fy) } else { (fy, fx) };
                let x0 = rng.random_range(CLEARANCE..extents[0] - CLEARANCE - sx);
                let y0 = rng.random_range(CLEARANCE..extents[1] - CLEARANCE - sy);
                let clear = furniture.iter().all(|o| {
                    x0 + sx + CLEARANCE <= o.min[0]
                        || o.max[0] + CLEARANCE <= x0
                        || y0 + sy + CLEARANCE <= o.min[1]
                        || o.max[1] + CLEARANCE <= y0
                });
                clear.then_some(FurnitureItem {
                    category: cat,
                    min: [x0, y0, z0],
                    max: [x0 + sx, y0 + sy, z1],
                    density: DENSITY,
                })
            });
            match placed {
                Some(item) => furniture.push(item),
                None => continue 'layout,
            }
        }
        break;
    }
    SceneSpec {
        extents,
        floor_density: DENSITY,
        wall_density: Some(DENSITY),
        furniture,
        seed,
    }
}

/// Noise model for [`synthetic_features`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureNoise {
    pub dim: usize,
    /// Standard deviation of per-instance centres.
    pub spread: f64,
    /// Standard deviation of per-point offsets from the centre.
    pub noise: f64,
}

impl Default for FeatureNoise {
    fn default() -> Self {
        Self {
            dim: 16,
            spread: 1.0,
            noise: 0.05,
        }
    }
}

/// Stand-in for learned embeddings: every ground-truth instance gets a
/// random centre and its points scatter around it. Unlabeled points get
/// one centre each.
pub fn synthetic_features(cloud: &LabeledCloud, model: FeatureNoise, seed: u64) -> Result<FeatureMatrix> {
    let gt = cloud.gt_instance.as_ref().ok_or(Error::MissingGroundTruth)?;
    if model.dim == 0 || !(model.spread >= 0.0) || !(model.noise >= 0.0) {
        return Err(Error::Config("feature dim must be positive, spread and noise non-negative".into()));
    }
    let mut rng = rng_from_seed(seed);
    let centre_dist = Normal::new(0.0, model.spread).map_err(|e| Error::Config(e.to_string()))?;
    let noise_dist = Normal::new(0.0, model.noise).map_err(|e| Error::Config(e.to_string()))?;
    let ids: BTreeMap<u32, usize> = gt
        .iter()
        .copied()
        .filter(|&g| g != UNLABELED)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, g)| (g, i))
        .collect();
    let centres: Vec<Vec<f64>> = (0..ids.len())
        .map(|_| (0..model.dim).map(|_| centre_dist.sample(&mut rng)).collect())
        .collect();
    let mut data = Vec::with_capacity(cloud.len() * model.dim);
    for &g in gt {
        let own;
        let centre = match ids.get(&g) {
            Some(&c) => &centres[c],
            None => {
                own = (0..model.dim).map(|_| centre_dist.sample(&mut rng)).collect::<Vec<f64>>();
                &own
            }
        };
        data.extend(centre.iter().map(|c| (c + noise_dist.sample(&mut rng)) as f32));
    }
    FeatureMatrix::new(cloud.len(), model.dim, data)
}
