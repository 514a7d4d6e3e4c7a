//! 3D detection evaluation: center-distance matching, AP over distance
//! thresholds, TP errors (translation, scale, orientation) and a composite
//! detection score.
//!
//! The composite uses the three reported TP errors only:
//! `NDS = (5·mAP + Σ (1 − min(1, mTP))) / 8`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{angle_distance, Box3D, Category};

pub const MIN_RECALL: f64 = 0.1;
pub const MIN_PRECISION: f64 = 0.1;
/// Number of recall sample points, `0, 0.01, …, 1`.
const RECALL_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: Box3D,
    pub score: f64,
}

impl Detection {
    pub fn new(bbox: Box3D, score: f64) -> Result<Self> {
        if !(score.is_finite() && (0.0..=1.0).contains(&score)) {
            return Err(Error::Validation(alloc::format!("score {score} outside [0, 1]")));
        }
        Ok(Self { bbox, score })
    }

    pub fn category(&self) -> Category {
        self.bbox.category()
    }
}

/// Detections (or ground truth) per frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    pub frames: Vec<Vec<Detection>>,
}

impl DetectionSet {
    pub fn validate(&self) -> Result<()> {
        for d in self.frames.iter().flatten() {
            if !(d.score.is_finite() && (0.0..=1.0).contains(&d.score)) {
                return Err(Error::Validation(alloc::format!("score {} outside [0, 1]", d.score)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchResult {
    /// `(detection index, ground-truth index)` in matching order.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_dets: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
}

#[inline]
fn planar_distance(a: &Box3D, b: &Box3D) -> f64 {
    let (p, q) = (a.center(), b.center());
    libm::hypot(p[0] - q[0], p[1] - q[1])
}

/// Detection indices by descending score; ties keep input order.
fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    order
}

/// Greedy one-to-one matching within a single frame and category: detections
/// in descending score order each take the nearest still-unmatched ground
/// truth within `threshold` meters (planar center distance).
pub fn match_detections(dets: &[Detection], gts: &[Box3D], threshold: f64) -> MatchResult {
    let mut taken = vec![false; gts.len()];
    let mut result = MatchResult::default();
    for d in score_order(dets) {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let dist = planar_distance(&dets[d].bbox, gt);
            if dist <= threshold && best.is_none_or(|(_, b)| dist < b) {
                best = Some((g, dist));
            }
        }
        match best {
            Some((g, _)) => {
                taken[g] = true;
                result.pairs.push((d, g));
            }
            None => result.unmatched_dets.push(d),
        }
    }
    result.unmatched_dets.sort_unstable();
    result.unmatched_gts = (0..gts.len()).filter(|&g| !taken[g]).collect();
    result
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsConfig {
    pub thresholds: Vec<f64>,
    pub tp_threshold: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { thresholds: vec![0.5, 1.0, 2.0, 4.0], tp_threshold: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMetrics {
    pub category: Category,
    pub num_gt: usize,
    pub num_tp: usize,
    /// `(threshold, AP)` per distance threshold.
    pub ap: Vec<(f64, f64)>,
    pub mean_ap: f64,
    pub ate: f64,
    pub ase: f64,
    pub aoe: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_category: Vec<CategoryMetrics>,
    pub map: f64,
    pub mate: f64,
    pub mase: f64,
    pub maoe: f64,
    pub nds: f64,
}

/// `1 − IoU` of two boxes after aligning their centers and headings.
pub fn scale_error(a: &Box3D, b: &Box3D) -> f64 {
    let (da, db) = (a.dims(), b.dims());
    let inter = da[0].min(db[0]) * da[1].min(db[1]) * da[2].min(db[2]);
    let union = da[0] * da[1] * da[2] + db[0] * db[1] * db[2] - inter;
    1.0 - inter / union
}

/// Precision sampled on the recall grid by piecewise-linear interpolation of
/// the PR points (one per detection, recall non-decreasing). Between repeated
/// recall values the last point wins; left of the curve precision is held,
/// right of it precision is 0.
fn interpolated_precision(recall: &[f64], precision: &[f64]) -> [f64; RECALL_POINTS] {
    let mut out = [0.0; RECALL_POINTS];
    let Some(&last) = recall.last() else { return out };
    for (k, slot) in out.iter_mut().enumerate() {
        let r = k as f64 / (RECALL_POINTS - 1) as f64;
        if r > last {
            *slot = 0.0;
        } else if r < recall[0] {
            *slot = precision[0];
        } else {
            // last index with recall ≤ r
            let j = recall.partition_point(|&x| x <= r) - 1;
            *slot = if j + 1 == recall.len() || recall[j] == r {
                precision[j]
            } else {
                let t = (r - recall[j]) / (recall[j + 1] - recall[j]);
                precision[j] + t * (precision[j + 1] - precision[j])
            };
        }
    }
    out
}

/// Area under the clipped precision curve above the recall floor, normalised to `[0, 1]`.
fn average_precision(tp_in_score_order: &[bool], num_gt: usize) -> f64 {
    let mut recall = Vec::with_capacity(tp_in_score_order.len());
    let mut precision = Vec::with_capacity(tp_in_score_order.len());
    let mut tp = 0usize;
    for (k, &is_tp) in tp_in_score_order.iter().enumerate() {
        tp += is_tp as usize;
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    let curve = interpolated_precision(&recall, &precision);
    let first = libm::round(100.0 * MIN_RECALL) as usize + 1;
    let tail = &curve[first..];
    let mean = tail.iter().map(|&p| p.max(MIN_PRECISION)).sum::<f64>() / tail.len() as f64;
    ((mean - MIN_PRECISION) / (1.0 - MIN_PRECISION)).clamp(0.0, 1.0)
}

struct Scored {
    frame: usize,
    index: usize,
    score: f64,
}

fn evaluate_category(
    category: Category,
    dets: &DetectionSet,
    gts: &DetectionSet,
    config: &MetricsConfig,
) -> Result<CategoryMetrics> {
    let frame_dets: Vec<Vec<Detection>> = dets
        .frames
        .iter()
        .map(|f| f.iter().copied().filter(|d| d.category() == category).collect())
        .collect();
    let frame_gts: Vec<Vec<Box3D>> = gts
        .frames
        .iter()
        .map(|f| f.iter().filter(|d| d.category() == category).map(|d| d.bbox).collect())
        .collect();
    let num_gt: usize = frame_gts.iter().map(Vec::len).sum();
    if num_gt == 0 {
        return Err(Error::NoGroundTruth);
    }

    // all detections of the category, by descending score across frames
    let mut scored: Vec<Scored> = frame_dets
        .iter()
        .enumerate()
        .flat_map(|(frame, ds)| ds.iter().enumerate().map(move |(index, d)| Scored { frame, index, score: d.score }))
        .collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.frame.cmp(&b.frame)).then(a.index.cmp(&b.index)));

    let mut ap = Vec::with_capacity(config.thresholds.len());
    for &t in &config.thresholds {
        let matched: Vec<Vec<bool>> = frame_dets
            .iter()
            .zip(&frame_gts)
            .map(|(ds, gs)| {
                let mut flags = vec![false; ds.len()];
                for (d, _) in match_detections(ds, gs, t).pairs {
                    flags[d] = true;
                }
                flags
            })
            .collect();
        let tps: Vec<bool> = scored.iter().map(|s| matched[s.frame][s.index]).collect();
        ap.push((t, average_precision(&tps, num_gt)));
    }
    let mean_ap = if ap.is_empty() { 0.0 } else { ap.iter().map(|x| x.1).sum::<f64>() / ap.len() as f64 };

    let (mut te, mut se, mut oe, mut n) = (0.0, 0.0, 0.0, 0usize);
    for (ds, gs) in frame_dets.iter().zip(&frame_gts) {
        for (d, g) in match_detections(ds, gs, config.tp_threshold).pairs {
            te += planar_distance(&ds[d].bbox, &gs[g]);
            se += scale_error(&ds[d].bbox, &gs[g]);
            oe += angle_distance(ds[d].bbox.yaw(), gs[g].yaw());
            n += 1;
        }
    }
    let (ate, ase, aoe) = if n == 0 { (1.0, 1.0, 1.0) } else { (te / n as f64, se / n as f64, oe / n as f64) };
    Ok(CategoryMetrics { category, num_gt, num_tp: n, ap, mean_ap, ate, ase, aoe })
}

/// Composite score from mean AP and the three mean TP errors.
pub fn detection_score(map: f64, mate: f64, mase: f64, maoe: f64) -> f64 {
    let tp: f64 = [mate, mase, maoe].iter().map(|e| 1.0 - e.min(1.0)).sum();
    (5.0 * map + tp) / 8.0
}

pub fn compute_metrics(dets: &DetectionSet, gts: &DetectionSet, config: &MetricsConfig) -> Result<MetricsReport> {
    dets.validate()?;
    gts.validate()?;
    if dets.frames.len() != gts.frames.len() {
        return Err(Error::Validation(alloc::format!(
            "{} detection frames vs {} ground-truth frames",
            dets.frames.len(),
            gts.frames.len()
        )));
    }
    if !(config.tp_threshold > 0.0) || config.thresholds.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Validation("distance thresholds must be positive".into()));
    }
    let mut per_category = Vec::new();
    for category in Category::ALL {
        match evaluate_category(category, dets, gts, config) {
            Ok(m) => per_category.push(m),
            Err(Error::NoGroundTruth) => {}
            Err(e) => return Err(e),
        }
    }
    if per_category.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    let mean = |f: fn(&CategoryMetrics) -> f64| per_category.iter().map(f).sum::<f64>() / per_category.len() as f64;
    let map = mean(|m| m.mean_ap);
    let mate = mean(|m| m.ate);
    let mase = mean(|m| m.ase);
    let maoe = mean(|m| m.aoe);
    let nds = detection_score(map, mate, mase, maoe);
    Ok(MetricsReport { per_category, map, mate, mase, maoe, nds })
}
