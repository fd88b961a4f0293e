//! Overlapping full-height blocks: partition, fixed-size resampling, and
//! merging of per-block labelings into one scene labeling.

use std::collections::HashMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::labeling::UnionFind;
use crate::rng::rng_from_seed;
use crate::types::{InstanceLabeling, LabeledCloud, UNLABELED};

/// Default Jaccard ratio at which two per-block instances are unified.
pub const MERGE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub origin_xy: [f64; 2],
    pub size_xy: [f64; 2],
    /// Ascending indices of scene points inside the footprint.
    pub member_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid {
    pub stride: f64,
    pub blocks: Vec<Block>,
    pub scene_n: usize,
}

/// A block resampled to a fixed size, with the scene index of every point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledBlock {
    pub cloud: LabeledCloud,
    pub source: Vec<usize>,
}

/// Number of origins `min + i * stride` needed before a block reaches past `max`.
fn origin_count(min: f64, max: f64, size: f64, stride: f64) -> usize {
    let mut n = ((max - min - size) / stride).ceil().max(0.0) as usize;
    while min + n as f64 * stride + size <= max {
        n += 1;
    }
    while n > 0 && min + (n - 1) as f64 * stride + size > max {
        n -= 1;
    }
    n + 1
}

/// Origins along one axis whose half-open interval contains `v`.
fn covering(v: f64, min: f64, size: f64, stride: f64, count: usize) -> impl Iterator<Item = usize> {
    let rel = v - min;
    let hi = ((rel / stride).floor() as isize + 1).clamp(0, count as isize - 1) as usize;
    let lo = (((rel - size) / stride).floor() as isize).clamp(0, count as isize - 1) as usize;
    let mut hits: Vec<usize> = (lo..=hi)
        .filter(|&i| {
            let o = min + i as f64 * stride;
            o <= v && v < o + size
        })
        .collect();
    if hits.is_empty() {
        // Rounding gap between consecutive blocks; keep coverage.
        hits.push(((rel / stride).floor() as usize).min(count - 1));
    }
    hits.into_iter()
}

/// Cuts the scene into `block_size` squares whose origins step by `stride`
/// from the scene's minimum corner. Empty blocks are dropped.
pub fn partition(cloud: &LabeledCloud, block_size: f64, stride: f64) -> Result<BlockGrid> {
    if cloud.is_empty() {
        return Err(Error::Empty("cloud"));
    }
    if !(block_size > 0.0) || !(stride > 0.0) || stride > block_size {
        return Err(Error::Config(format!(
            "need block_size > 0 and 0 < stride <= block_size, got {block_size} / {stride}"
        )));
    }
    let (lo, hi) = cloud.bounds();
    let nx = origin_count(lo.x, hi.x, block_size, stride);
    let ny = origin_count(lo.y, hi.y, block_size, stride);
    let mut members = vec![Vec::new(); nx * ny];
    for (i, p) in cloud.points.iter().enumerate() {
        let ys: Vec<usize> = covering(p.y, lo.y, block_size, stride, ny).collect();
        for ix in covering(p.x, lo.x, block_size, stride, nx) {
            for &iy in &ys {
                members[ix * ny + iy].push(i);
            }
        }
    }
    let blocks = members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(b, member_indices)| Block {
            origin_xy: [
                lo.x + (b / ny) as f64 * stride,
                lo.y + (b % ny) as f64 * stride,
            ],
            size_xy: [block_size, block_size],
            member_indices,
        })
        .collect();
    Ok(BlockGrid {
        stride,
        blocks,
        scene_n: cloud.len(),
    })
}

/// Resamples a block to exactly `target_n` points: without replacement when
/// it has enough members, otherwise every member once plus uniform padding.
pub fn resample_block(block: &Block, cloud: &LabeledCloud, target_n: usize, seed: u64) -> Result<ResampledBlock> {
    let m = &block.member_indices;
    if m.is_empty() {
        return Err(Error::Empty("block"));
    }
    if target_n == 0 {
        return Err(Error::Config("block target size must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let source: Vec<usize> = if m.len() >= target_n {
        index::sample(&mut rng, m.len(), target_n)
            .into_iter()
            .map(|i| m[i])
            .collect()
    } else {
        let mut s = m.clone();
        s.shuffle(&mut rng);
        s.extend((m.len()..target_n).map(|_| m[rng.random_range(0..m.len())]));
        s
    };
    Ok(ResampledBlock {
        cloud: cloud.select(&source),
        source,
    })
}

/// Merges labelings aligned with each block's `member_indices`.
pub fn merge_blocks(grid: &BlockGrid, per_block: &[InstanceLabeling], threshold: f64) -> Result<InstanceLabeling> {
    if per_block.len() != grid.blocks.len() {
        return Err(Error::LengthMismatch {
            what: "block labelings",
            expected: grid.blocks.len(),
            found: per_block.len(),
        });
    }
    let parts: Vec<(&[usize], &InstanceLabeling)> = grid
        .blocks
        .iter()
        .zip(per_block)
        .map(|(b, l)| (b.member_indices.as_slice(), l))
        .collect();
    merge_labelings(grid.scene_n, &parts, threshold)
}

/// Merges labelings aligned with resampled blocks (one labeling per block,
/// one id per resampled point).
pub fn merge_resampled(
    scene_n: usize,
    blocks: &[ResampledBlock],
    per_block: &[InstanceLabeling],
    threshold: f64,
) -> Result<InstanceLabeling> {
    if per_block.len() != blocks.len() {
        return Err(Error::LengthMismatch {
            what: "block labelings",
            expected: blocks.len(),
            found: per_block.len(),
        });
    }
    let parts: Vec<(&[usize], &InstanceLabeling)> = blocks
        .iter()
        .zip(per_block)
        .map(|(b, l)| (b.source.as_slice(), l))
        .collect();
    merge_labelings(scene_n, &parts, threshold)
}

#[derive(Clone, Copy)]
struct Occurrence {
    point: usize,
    part: u32,
    node: u32,
    category: u32,
}

/// Merges any set of partial labelings of a scene.
///
/// Each part is `(scene indices, labeling)`; a scene index repeated within
/// a part keeps its first label. Per-part instances are unified when the
/// Jaccard ratio of their points, restricted to points both parts labeled,
/// reaches `threshold`. Each point then takes the unified id most of its
/// parts vote for, ties to the unified id whose point set sorts first.
/// Output ids are dense, numbered by first point.
pub fn merge_labelings(
    scene_n: usize,
    parts: &[(&[usize], &InstanceLabeling)],
    threshold: f64,
) -> Result<InstanceLabeling> {
    let with_categories = !parts.is_empty() && parts.iter().all(|(_, l)| l.categories.is_some());
    let mut node_of: HashMap<(u32, u32), u32> = HashMap::new();
    let mut occ = Vec::new();
    for (pi, (source, labeling)) in parts.iter().enumerate() {
        labeling.check_len(source.len(), "block labeling")?;
        let mut seen: HashMap<usize, ()> = HashMap::with_capacity(source.len());
        for (pos, (&point, &label)) in source.iter().zip(&labeling.labels).enumerate() {
            if point >= scene_n {
                return Err(Error::IndexOutOfRange {
                    index: point,
                    len: scene_n,
                });
            }
            if seen.insert(point, ()).is_some() || label == UNLABELED {
                continue;
            }
            let next = node_of.len() as u32;
            let node = *node_of.entry((pi as u32, label)).or_insert(next);
            let category = labeling.categories.as_ref().map_or(UNLABELED, |c| c[pos]);
            occ.push(Occurrence {
                point,
                part: pi as u32,
                node,
                category,
            });
        }
    }
    occ.sort_by_key(|o| (o.point, o.part));

    let mut inter: HashMap<(u32, u32), usize> = HashMap::new();
    let mut shared: HashMap<(u32, u32), usize> = HashMap::new();
    for run in occ.chunk_by(|a, b| a.point == b.point) {
        for (i, a) in run.iter().enumerate() {
            for b in &run[i + 1..] {
                *inter.entry((a.node, b.node)).or_default() += 1;
                *shared.entry((a.node, b.part)).or_default() += 1;
                *shared.entry((b.node, a.part)).or_default() += 1;
            }
        }
    }
    let part_of_node = {
        let mut v = vec![0u32; node_of.len()];
        for (&(part, _), &node) in &node_of {
            v[node as usize] = part;
        }
        v
    };
    let mut uf = UnionFind::new(node_of.len());
    let mut pairs: Vec<_> = inter.into_iter().collect();
    pairs.sort_unstable();
    for ((a, b), n_ab) in pairs {
        let n_a = shared[&(a, part_of_node[b as usize])];
        let n_b = shared[&(b, part_of_node[a as usize])];
        let jaccard = n_ab as f64 / (n_a + n_b - n_ab) as f64;
        if jaccard >= threshold {
            uf.union(a as usize, b as usize);
        }
    }

    // Rank unified components by their sorted point sets so that the
    // result does not depend on the order of the parts.
    let comp_of_node: Vec<usize> = (0..node_of.len()).map(|n| uf.find(n)).collect();
    let mut comp_points: HashMap<usize, Vec<usize>> = HashMap::new();
    for o in &occ {
        comp_points.entry(comp_of_node[o.node as usize]).or_default().push(o.point);
    }
    let mut comps: Vec<(usize, Vec<usize>)> = comp_points
        .into_iter()
        .map(|(c, mut pts)| {
            pts.dedup();
            (c, pts)
        })
        .collect();
    comps.sort_by(|a, b| a.1.cmp(&b.1));
    let mut rank_of_comp: HashMap<usize, u32> = HashMap::with_capacity(comps.len());
    for (rank, (c, _)) in comps.iter().enumerate() {
        rank_of_comp.insert(*c, rank as u32);
    }
    let rank_of = |o: &Occurrence| rank_of_comp[&comp_of_node[o.node as usize]];

    let mut comp_category: Vec<HashMap<u32, usize>> = vec![HashMap::new(); comps.len()];
    if with_categories {
        for o in &occ {
            *comp_category[rank_of(o) as usize].entry(o.category).or_default() += 1;
        }
    }
    let category_of: Vec<u32> = comp_category
        .iter()
        .map(|votes| {
            votes
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map_or(UNLABELED, |(&c, _)| c)
        })
        .collect();

    let mut winner = vec![u32::MAX; scene_n];
    for run in occ.chunk_by(|a, b| a.point == b.point) {
        let mut votes: Vec<u32> = run.iter().map(rank_of).collect();
        votes.sort_unstable();
        let best = votes
            .chunk_by(|a, b| a == b)
            .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
            .expect("non-empty run")[0];
        winner[run[0].point] = best;
    }

    let mut dense = vec![u32::MAX; comps.len()];
    let mut next = 0u32;
    let mut labels = vec![UNLABELED; scene_n];
    let mut categories = vec![UNLABELED; scene_n];
    for (p, &w) in winner.iter().enumerate() {
        if w == u32::MAX {
            continue;
        }
        if dense[w as usize] == u32::MAX {
            dense[w as usize] = next;
            next += 1;
        }
        labels[p] = dense[w as usize];
        categories[p] = category_of[w as usize];
    }
    Ok(InstanceLabeling {
        labels,
        categories: with_categories.then_some(categories),
    })
}
