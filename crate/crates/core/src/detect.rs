//! Part candidates from confidence maps by non-maximum suppression.

use serde::{Deserialize, Serialize};

use crate::fields::FieldStack;
use crate::geometry::Point;

/// A detected peak `d_j^m`. Positions are in grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartCandidate {
    pub part: usize,
    /// Rank within its part, by descending score.
    pub index: usize,
    pub position: Point,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub threshold: f64,
    pub window_radius: usize,
    pub subpixel: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { threshold: 0.1, window_radius: 3, subpixel: true }
    }
}

/// Integer peak before refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeakIndex {
    pub col: usize,
    pub row: usize,
}

/// Pixels above `threshold` that dominate their `(2r + 1)^2` window.
///
/// A neighbour with an equal value only loses if it comes later in
/// `(row, col)` order, so plateaus yield exactly one peak.
pub fn nms_peaks(
    plane: &[f32],
    width: usize,
    height: usize,
    threshold: f64,
    window_radius: usize,
) -> Vec<(PeakIndex, f32)> {
    assert_eq!(plane.len(), width * height, "plane size does not match grid");
    let r = window_radius;
    let mut peaks = Vec::new();
    for row in 0..height {
        for col in 0..width {
            let v = plane[row * width + col];
            if f64::from(v) <= threshold {
                continue;
            }
            let dominated = (row.saturating_sub(r)..=(row + r).min(height - 1)).any(|qr| {
                (col.saturating_sub(r)..=(col + r).min(width - 1)).any(|qc| {
                    let q = plane[qr * width + qc];
                    q > v || (q == v && (qr, qc) < (row, col))
                })
            });
            if !dominated {
                peaks.push((PeakIndex { col, row }, v));
            }
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then((a.0.row, a.0.col).cmp(&(b.0.row, b.0.col))));
    peaks
}

/// Per-axis parabola through the 3×3 neighbourhood; the offset is clamped to
/// half a pixel. Peaks on the grid border are returned as is.
pub fn subpixel_refine(plane: &[f32], width: usize, height: usize, peak: PeakIndex) -> Point {
    let PeakIndex { col, row } = peak;
    let unrefined = Point::new(col as f64, row as f64);
    if col == 0 || row == 0 || col + 1 >= width || row + 1 >= height {
        return unrefined;
    }
    let at = |c: usize, r: usize| f64::from(plane[r * width + c]);
    let offset = |minus: f64, centre: f64, plus: f64| {
        let curvature = minus - 2.0 * centre + plus;
        if curvature < 0.0 {
            (0.5 * (minus - plus) / curvature).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let c = at(col, row);
    Point::new(
        col as f64 + offset(at(col - 1, row), c, at(col + 1, row)),
        row as f64 + offset(at(col, row - 1), c, at(col, row + 1)),
    )
}

/// Candidates of one part from its confidence plane.
pub fn detect_part(
    plane: &[f32],
    width: usize,
    height: usize,
    part: usize,
    config: &DetectConfig,
) -> Vec<PartCandidate> {
    nms_peaks(plane, width, height, config.threshold, config.window_radius)
        .into_iter()
        .enumerate()
        .map(|(index, (peak, score))| PartCandidate {
            part,
            index,
            position: if config.subpixel {
                subpixel_refine(plane, width, height, peak)
            } else {
                Point::new(peak.col as f64, peak.row as f64)
            },
            score: f64::from(score),
        })
        .collect()
}

/// Candidates for every part of a field stack, indexed by part.
pub fn detect_candidates(stack: &FieldStack, config: &DetectConfig) -> Vec<Vec<PartCandidate>> {
    (0..stack.num_parts)
        .map(|j| detect_part(stack.confidence(j), stack.width, stack.height, j, config))
        .collect()
}
