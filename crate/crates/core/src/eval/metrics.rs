//! Keypoint similarity metrics and average precision.

use super::EvalError;
use crate::geometry::Point;

/// A pose as a list of optional keypoints, one per part.
pub type Pose = [Option<Point>];

/// Uniform per-part OKS falloff.
pub const DEFAULT_KAPPA: f64 = 0.08;

/// OKS thresholds 0.50, 0.55, ..., 0.95.
pub fn oks_thresholds() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

/// Bounding-box diagonal of the annotated parts divided by √2.
pub fn person_scale(gt: &Pose) -> Option<f64> {
    let mut it = gt.iter().flatten();
    let first = *it.next()?;
    let (mut lo, mut hi) = (first, first);
    for p in it {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    Some(lo.distance(hi) / std::f64::consts::SQRT_2)
}

/// Object keypoint similarity: mean over annotated ground-truth parts of
/// `exp(-d^2 / (2 s^2 κ_j^2))`. A part missing from the prediction
/// contributes zero.
pub fn oks(predicted: &Pose, gt: &Pose, gt_scale: f64, kappas: &[f64]) -> Result<f64, EvalError> {
    if gt_scale.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(EvalError::NonPositiveScale(gt_scale));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (j, g) in gt.iter().enumerate() {
        let Some(g) = g else { continue };
        count += 1;
        if let Some(Some(p)) = predicted.get(j) {
            let k = kappas.get(j).copied().unwrap_or(DEFAULT_KAPPA);
            sum += (-p.distance2(*g) / (2.0 * gt_scale * gt_scale * k * k)).exp();
        }
    }
    if count == 0 {
        return Err(EvalError::NoAnnotatedParts);
    }
    Ok(sum / count as f64)
}

/// Fraction of annotated ground-truth parts predicted within
/// `alpha × head_size`.
pub fn pckh(predicted: &Pose, gt: &Pose, head_size: f64, alpha: f64) -> Result<f64, EvalError> {
    if head_size.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(EvalError::NonPositiveScale(head_size));
    }
    let radius = alpha * head_size;
    let mut hits = 0usize;
    let mut count = 0usize;
    for (j, g) in gt.iter().enumerate() {
        let Some(g) = g else { continue };
        count += 1;
        if let Some(Some(p)) = predicted.get(j) {
            if p.distance(*g) <= radius {
                hits += 1;
            }
        }
    }
    if count == 0 {
        return Err(EvalError::NoAnnotatedParts);
    }
    Ok(hits as f64 / count as f64)
}

/// Greedy one-to-one matching by descending similarity, keeping pairs with
/// similarity at least `threshold`. `sim[p][g]` is prediction `p` against
/// ground truth `g`. Ties go to the lower `(p, g)`.
pub fn match_by_similarity(sim: &[Vec<f64>], threshold: f64) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize, f64)> = sim
        .iter()
        .enumerate()
        .flat_map(|(p, row)| row.iter().enumerate().map(move |(g, &s)| (p, g, s)))
        .filter(|&(_, _, s)| s >= threshold)
        .collect();
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    let n_gt = sim.first().map_or(0, Vec::len);
    let mut pred_used = vec![false; sim.len()];
    let mut gt_used = vec![false; n_gt];
    let mut out = Vec::new();
    for (p, g, s) in pairs {
        if !pred_used[p] && !gt_used[g] {
            pred_used[p] = true;
            gt_used[g] = true;
            out.push((p, g, s));
        }
    }
    out
}

/// 101-point interpolated average precision from `(score, is_true_positive)`
/// detections. `None` when there is no ground truth.
pub fn average_precision(detections: &[(f64, bool)], n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    let mut sorted = detections.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut tp = 0usize;
    let mut curve = Vec::with_capacity(sorted.len());
    for (i, &(_, hit)) in sorted.iter().enumerate() {
        if hit {
            tp += 1;
        }
        curve.push((tp as f64 / n_gt as f64, tp as f64 / (i + 1) as f64));
    }
    // Precision envelope, non-increasing in recall.
    for i in (0..curve.len().saturating_sub(1)).rev() {
        curve[i].1 = curve[i].1.max(curve[i + 1].1);
    }
    let mut sum = 0.0;
    let mut k = 0;
    for step in 0..=100 {
        let r = step as f64 / 100.0;
        while k < curve.len() && curve[k].0 < r - 1e-12 {
            k += 1;
        }
        if k < curve.len() {
            sum += curve[k].1;
        }
    }
    Some(sum / 101.0)
}
