//! Landmark selection: uniform random, grid-based (n nearest block points
//! of every grid vertex, growing n), and grid-extension (single nearest
//! point of every vertex, doubling the grid).
//!
//! All samplers return exactly K distinct indices and are deterministic in
//! their seed. Grid candidates are tracked as a distinct set, and the final
//! K are drawn uniformly without replacement from it.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::propagation::SpatialIndex;
use crate::rng::rng_from_seed;
use crate::types::{bounds_of, LabeledCloud, LandmarkSet, Point3, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub grid_points: usize,
    pub nmin: usize,
    pub nstep: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            grid_points: 2048,
            nmin: 1,
            nstep: 1,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points == 0 || self.nmin == 0 || self.nstep == 0 {
            return Err(Error::Config(
                "grid_points, nmin and nstep must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridExtConfig {
    pub initial_grid: usize,
    pub growth_factor: usize,
    /// Growth stops once the grid holds this many vertices per block point.
    /// Points that no vertex reaches (exact duplicates, slivers of Voronoi
    /// cell) would otherwise keep the loop alive forever.
    pub max_grid_per_point: usize,
}

impl Default for GridExtConfig {
    fn default() -> Self {
        Self {
            initial_grid: 128,
            growth_factor: 2,
            max_grid_per_point: 32,
        }
    }
}

impl GridExtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_grid == 0 || self.growth_factor < 2 || self.max_grid_per_point == 0 {
            return Err(Error::Config(
                "initial_grid and max_grid_per_point must be >= 1 and growth_factor >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// Strategy plus the knobs of both grid samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    pub grid: GridConfig,
    pub grid_ext: GridExtConfig,
}

impl SamplerConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            grid: GridConfig::default(),
            grid_ext: GridExtConfig::default(),
        }
    }

    pub fn sample(&self, cloud: &LabeledCloud, k: usize, seed: u64) -> Result<LandmarkSet> {
        match self.strategy {
            Strategy::Random => random_sample(cloud, k, seed),
            Strategy::Grid => grid_sample(cloud, k, &self.grid, seed),
            Strategy::GridExtension => grid_extension_sample(cloud, k, &self.grid_ext, seed),
        }
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidLandmarkCount { k, n });
    }
    Ok(())
}

pub fn random_sample(cloud: &LabeledCloud, k: usize, seed: u64) -> Result<LandmarkSet> {
    let n = cloud.len();
    check_k(k, n)?;
    let mut rng = rng_from_seed(seed);
    let picked = index::sample(&mut rng, n, k).into_vec();
    LandmarkSet::new(picked, n, Strategy::Random, seed)
}

/// Per-axis vertex counts for a bounding box with edge lengths `extent`.
///
/// Zero-length axes get one vertex. The other axes get counts proportional
/// to their length, rounded down, then topped up one axis at a time while
/// the product stays within `grid_points`.
pub fn grid_dims(extent: [f64; 3], grid_points: usize) -> [usize; 3] {
    let target = grid_points.max(1) as f64;
    let mut dims = [1usize; 3];
    let mut active: Vec<usize> = (0..3).filter(|&a| extent[a] > 0.0).collect();
    let mut ideal = [1.0f64; 3];
    // Axes whose ideal count drops below one collapse, which frees budget for the rest.
    loop {
        if active.is_empty() {
            return dims;
        }
        let volume: f64 = active.iter().map(|&a| extent[a]).product();
        let scale = (target / volume).powf(1.0 / active.len() as f64);
        let before = active.len();
        active.retain(|&a| scale * extent[a] >= 1.0 - 1e-9);
        if active.len() == before {
            for &a in &active {
                ideal[a] = scale * extent[a];
            }
            break;
        }
    }
    for &a in &active {
        dims[a] = ((ideal[a] + 1e-9).floor() as usize).max(1);
    }
    let product = |d: &[usize; 3]| d.iter().product::<usize>();
    while product(&dims) > grid_points.max(1) {
        let worst = *active
            .iter()
            .max_by(|&&a, &&b| (dims[a] as f64 / ideal[a]).total_cmp(&(dims[b] as f64 / ideal[b])))
            .expect("active axes");
        dims[worst] -= 1;
    }
    loop {
        let mut order = active.clone();
        order.sort_by(|&a, &b| {
            (dims[a] as f64 / ideal[a])
                .total_cmp(&(dims[b] as f64 / ideal[b]))
                .then(a.cmp(&b))
        });
        let grown = order.into_iter().find(|&a| {
            let mut d = dims;
            d[a] += 1;
            product(&d) <= grid_points
        });
        match grown {
            Some(a) => dims[a] += 1,
            None => return dims,
        }
    }
}

/// Evenly spaced grid vertices over the cloud's bounding box, corners included.
pub fn make_grid(cloud: &LabeledCloud, grid_points: usize) -> Result<Vec<Point3>> {
    if grid_points == 0 {
        return Err(Error::Config("grid_points must be at least 1".into()));
    }
    if cloud.is_empty() {
        return Err(Error::Empty("cloud"));
    }
    Ok(grid_over(&cloud.points, grid_points))
}

fn grid_over(points: &[Point3], grid_points: usize) -> Vec<Point3> {
    let (lo, hi) = bounds_of(points);
    let lo = lo.to_array();
    let hi = hi.to_array();
    let extent = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let dims = grid_dims(extent, grid_points);
    let coord = |axis: usize, j: usize| {
        if dims[axis] == 1 {
            lo[axis]
        } else if j + 1 == dims[axis] {
            hi[axis]
        } else {
            lo[axis] + extent[axis] * j as f64 / (dims[axis] - 1) as f64
        }
    };
    let mut grid = Vec::with_capacity(dims.iter().product());
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                grid.push(Point3::new(coord(0, i), coord(1, j), coord(2, k)));
            }
        }
    }
    grid
}

pub fn grid_sample(cloud: &LabeledCloud, k: usize, cfg: &GridConfig, seed: u64) -> Result<LandmarkSet> {
    cfg.validate()?;
    check_k(k, cloud.len())?;
    let grid = grid_over(&cloud.points, cfg.grid_points);
    grid_sample_on(cloud, &grid, k, cfg, seed)
}

/// Grid-based sampling against an explicit set of grid vertices.
pub fn grid_sample_on(
    cloud: &LabeledCloud,
    grid: &[Point3],
    k: usize,
    cfg: &GridConfig,
    seed: u64,
) -> Result<LandmarkSet> {
    check_k(k, cloud.len())?;
    if grid.is_empty() {
        return Err(Error::Empty("grid"));
    }
    let index = SpatialIndex::from_points(&cloud.points)?;
    let (candidates, _) = grid_candidates(&index, grid, k, cfg);
    draw(candidates, k, cloud.len(), Strategy::Grid, seed)
}

/// Distinct candidate set of the grid sampler and the neighbour count `n`
/// at which it first held at least `k` indices. Candidates are ascending.
///
/// Instead of re-querying for every `n`, each vertex is asked for its `m`
/// nearest points once, and every point records the best rank at which any
/// vertex reaches it. The candidate set for `n <= m` is then the points
/// with rank below `n`. `m` doubles until it decides the answer.
pub fn grid_candidates(index: &SpatialIndex, grid: &[Point3], k: usize, cfg: &GridConfig) -> (Vec<usize>, usize) {
    const VERTEX_CHUNK: usize = 64;
    let n_pts = index.len();
    let mut m = cfg.nmin.min(n_pts).max(1);
    loop {
        let chunks: Vec<&[Point3]> = grid.chunks(VERTEX_CHUNK).collect();
        let partial = par::map_slice(&chunks, |chunk| {
            let mut best = vec![u32::MAX; n_pts];
            for v in chunk.iter() {
                for (rank, (id, _)) in index.k_nearest(&v.to_array(), m).into_iter().enumerate() {
                    best[id] = best[id].min(rank as u32);
                }
            }
            best
        });
        let mut rank = vec![u32::MAX; n_pts];
        for part in &partial {
            for (r, &p) in rank.iter_mut().zip(part) {
                *r = (*r).min(p);
            }
        }
        let mut hist = vec![0usize; m + 1];
        for &r in &rank {
            if r != u32::MAX {
                hist[r as usize] += 1;
            }
        }
        let mut n = cfg.nmin;
        let mut collected = 0usize;
        let mut counted = 0usize;
        loop {
            if n > m {
                break;
            }
            while counted < n {
                collected += hist[counted];
                counted += 1;
            }
            if collected >= k {
                return (select_ranked(&rank, n), n);
            }
            n += cfg.nstep;
        }
        if m == n_pts {
            // Every vertex now reaches every point; the next n collects all.
            return ((0..n_pts).collect(), n);
        }
        m = (m * 2).max(n).min(n_pts);
    }
}

fn select_ranked(rank: &[u32], n: usize) -> Vec<usize> {
    rank.iter()
        .enumerate()
        .filter(|(_, &r)| (r as usize) < n && r != u32::MAX)
        .map(|(i, _)| i)
        .collect()
}

pub fn grid_extension_sample(
    cloud: &LabeledCloud,
    k: usize,
    cfg: &GridExtConfig,
    seed: u64,
) -> Result<LandmarkSet> {
    cfg.validate()?;
    let n = cloud.len();
    check_k(k, n)?;
    let index = SpatialIndex::from_points(&cloud.points)?;
    let (candidates, _, complete) = grid_extension_candidates(&index, &cloud.points, k, cfg);
    if complete {
        return draw(candidates, k, n, Strategy::GridExtension, seed);
    }
    // Growth cap reached: keep every collected point, fill the rest uniformly.
    let mut rng = rng_from_seed(seed);
    let mut taken = vec![false; n];
    for &c in &candidates {
        taken[c] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
    let mut out = candidates;
    let need = k - out.len();
    out.extend(index::sample(&mut rng, rest.len(), need).into_iter().map(|i| rest[i]));
    LandmarkSet::new(out, n, Strategy::GridExtension, seed)
}

/// Distinct 1-nearest candidates of the doubling grid, the final grid size,
/// and whether the candidate set reached `k` before the growth cap.
pub fn grid_extension_candidates(
    index: &SpatialIndex,
    points: &[Point3],
    k: usize,
    cfg: &GridExtConfig,
) -> (Vec<usize>, usize, bool) {
    let n_pts = index.len();
    let cap = cfg.initial_grid.max(cfg.max_grid_per_point.saturating_mul(n_pts));
    let mut n_grid = cfg.initial_grid;
    loop {
        let grid = grid_over(points, n_grid);
        let nearest = par::map_slice(&grid, |v| index.nearest_point(v).0);
        let mut hit = vec![false; n_pts];
        for id in nearest {
            hit[id] = true;
        }
        let candidates: Vec<usize> = (0..n_pts).filter(|&i| hit[i]).collect();
        if candidates.len() >= k {
            return (candidates, n_grid, true);
        }
        if n_grid >= cap {
            return (candidates, n_grid, false);
        }
        n_grid = n_grid.saturating_mul(cfg.growth_factor);
    }
}

fn draw(candidates: Vec<usize>, k: usize, n: usize, strategy: Strategy, seed: u64) -> Result<LandmarkSet> {
    debug_assert!(candidates.len() >= k);
    let mut rng = rng_from_seed(seed);
    let picked = index::sample(&mut rng, candidates.len(), k)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    LandmarkSet::new(picked, n, strategy, seed)
}
