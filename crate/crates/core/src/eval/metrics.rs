//! Instance IoU and mAP.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{InstanceLabeling, LabeledCloud, UNLABELED};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub iou_threshold: f64,
    /// `None` scores per category whenever both prediction and ground truth
    /// carry categories, and pools everything into one category otherwise.
    pub category_aware: Option<bool>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            category_aware: None,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "IoU threshold must lie in (0, 1], got {}",
                self.iou_threshold
            )));
        }
        Ok(())
    }
}

/// IoU of two point-index sets. Repeated indices count once.
pub fn instance_iou(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("instance point set"));
    }
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(inter as f64 / (a.len() + b.len() - inter) as f64)
}

struct Instance {
    points: Vec<usize>,
    category: u32,
}

/// Groups points by id (UNLABELED skipped). Each instance's category is the
/// most common category among its points, ties to the smaller value.
fn instances(ids: &[u32], categories: Option<&[u32]>) -> Vec<Instance> {
    let mut by_id: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (p, &id) in ids.iter().enumerate() {
        if id != UNLABELED {
            by_id.entry(id).or_default().push(p);
        }
    }
    by_id
        .into_values()
        .map(|points| {
            let category = categories.map_or(0, |c| {
                let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
                for &p in &points {
                    *votes.entry(c[p]).or_default() += 1;
                }
                votes
                    .into_iter()
                    .fold((0, 0), |best, (cat, n)| if n > best.1 { (cat, n) } else { best })
                    .0
            });
            Instance { points, category }
        })
        .collect()
}

/// All-point interpolated area under the precision-recall curve.
///
/// Recall only moves at true positives, by `1 / n_gt` each, so the area is
/// the mean over true positives of the precision envelope at that rank.
fn average_precision(hits: &[bool], n_gt: usize) -> f64 {
    let mut tp = 0usize;
    let precision: Vec<f64> = hits
        .iter()
        .enumerate()
        .map(|(i, &hit)| {
            tp += usize::from(hit);
            tp as f64 / (i + 1) as f64
        })
        .collect();
    let mut envelope = 0.0f64;
    let mut total = 0.0;
    for (&hit, &p) in hits.iter().zip(&precision).rev() {
        envelope = envelope.max(p);
        if hit {
            total += envelope;
        }
    }
    total / n_gt as f64
}

/// Instance mAP of `pred` against the cloud's ground truth.
///
/// Predicted instances are ranked by point count (ties: smallest point
/// index first) and greedily matched, within a category, to the unmatched
/// ground-truth instance of highest IoU. Categories without ground-truth
/// instances are not scored.
pub fn mean_average_precision(pred: &InstanceLabeling, gt: &LabeledCloud, cfg: &MatchConfig) -> Result<f64> {
    cfg.validate()?;
    let gt_ids = gt.gt_instance.as_ref().ok_or(Error::MissingGroundTruth)?;
    pred.check_len(gt_ids.len(), "predicted labels")?;
    let aware = cfg
        .category_aware
        .unwrap_or(pred.categories.is_some() && gt.gt_category.is_some());
    let (pred_cat, gt_cat) = if aware {
        match (pred.categories.as_deref(), gt.gt_category.as_deref()) {
            (Some(p), Some(g)) => (Some(p), Some(g)),
            _ => {
                return Err(Error::Config(
                    "category-aware scoring needs categories on both prediction and ground truth".into(),
                ))
            }
        }
    } else {
        (None, None)
    };

    let mut gts = instances(gt_ids, gt_cat);
    gts.sort_by_key(|g| g.points[0]);
    if gts.is_empty() {
        return Err(Error::Empty("ground-truth instances"));
    }
    let mut preds = instances(&pred.labels, pred_cat);
    preds.sort_by_key(|p| (std::cmp::Reverse(p.points.len()), p.points[0]));

    // Dense ground-truth index per point for intersection counting.
    let mut gt_of = vec![usize::MAX; gt_ids.len()];
    for (g, inst) in gts.iter().enumerate() {
        for &p in &inst.points {
            gt_of[p] = g;
        }
    }

    let mut categories: BTreeMap<u32, usize> = BTreeMap::new();
    for g in &gts {
        *categories.entry(g.category).or_default() += 1;
    }
    let mut matched = vec![false; gts.len()];
    let mut hits: BTreeMap<u32, Vec<bool>> = BTreeMap::new();
    for p in &preds {
        if !categories.contains_key(&p.category) {
            continue;
        }
        let mut inter: BTreeMap<usize, usize> = BTreeMap::new();
        for &pt in &p.points {
            let g = gt_of[pt];
            if g != usize::MAX && !matched[g] && gts[g].category == p.category {
                *inter.entry(g).or_default() += 1;
            }
        }
        // BTreeMap order makes ties go to the ground-truth instance with
        // the smallest first point.
        let best = inter
            .into_iter()
            .map(|(g, n)| (g, n as f64 / (p.points.len() + gts[g].points.len() - n) as f64))
            .fold(None, |best: Option<(usize, f64)>, (g, iou)| match best {
                Some((_, b)) if b >= iou => best,
                _ => Some((g, iou)),
            });
        let hit = match best {
            Some((g, iou)) if iou >= cfg.iou_threshold => {
                matched[g] = true;
                true
            }
            _ => false,
        };
        hits.entry(p.category).or_default().push(hit);
    }
    let total: f64 = categories
        .iter()
        .map(|(c, &n)| hits.get(c).map_or(0.0, |h| average_precision(h, n)))
        .sum();
    Ok(total / categories.len() as f64)
}
