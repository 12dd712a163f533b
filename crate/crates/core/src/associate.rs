//! Limb scoring by PAF line integrals and per-limb bipartite matching.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::PartCandidate;
use crate::fields::PafView;
use crate::geometry::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssociateError {
    #[error("candidate segment has zero length at ({0}, {1})")]
    CoincidentCandidates(f64, f64),
    #[error("line integral needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Matcher {
    #[default]
    Hungarian,
    Greedy,
}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Matcher::Hungarian => "hungarian",
            Matcher::Greedy => "greedy",
        })
    }
}

impl FromStr for Matcher {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hungarian" => Ok(Matcher::Hungarian),
            "greedy" => Ok(Matcher::Greedy),
            other => Err(format!("unknown matcher {other:?} (expected hungarian or greedy)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationConfig {
    pub n_samples: usize,
    /// A pair is eligible only if its score exceeds this.
    pub min_score: f64,
    /// Per-sample dot product that counts as support.
    pub sample_threshold: f64,
    /// Minimum fraction of supporting samples.
    pub min_support: f64,
    pub interpolation: Interpolation,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            n_samples: 10,
            min_score: 0.05,
            sample_threshold: 0.05,
            min_support: 0.8,
            interpolation: Interpolation::Bilinear,
        }
    }
}

impl AssociationConfig {
    pub fn acceptance(&self) -> Acceptance {
        Acceptance { min_score: self.min_score, min_support: self.min_support }
    }
}

/// Eligibility rule applied by both matchers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub min_score: f64,
    pub min_support: f64,
}

impl Acceptance {
    /// Accept any strictly positive score.
    pub const POSITIVE: Acceptance = Acceptance { min_score: 0.0, min_support: 0.0 };
}

/// Reads one field vector at a continuous grid position. Positions outside
/// `[0, w-1] × [0, h-1]` read as zero.
pub fn sample_field(paf: PafView<'_>, p: Point, interpolation: Interpolation) -> Point {
    let (w, h) = (paf.width, paf.height);
    let inside = p.x >= 0.0 && p.y >= 0.0 && p.x <= (w - 1) as f64 && p.y <= (h - 1) as f64;
    if w == 0 || h == 0 || !inside {
        return Point::default();
    }
    let at = |c: usize, r: usize| {
        let i = r * w + c;
        Point::new(f64::from(paf.x[i]), f64::from(paf.y[i]))
    };
    match interpolation {
        Interpolation::Nearest => at(p.x.round() as usize, p.y.round() as usize),
        Interpolation::Bilinear => {
            let c0 = (p.x.floor() as usize).min(w.saturating_sub(2));
            let r0 = (p.y.floor() as usize).min(h.saturating_sub(2));
            let c1 = (c0 + 1).min(w - 1);
            let r1 = (r0 + 1).min(h - 1);
            let fx = p.x - c0 as f64;
            let fy = p.y - r0 as f64;
            let top = at(c0, r0) * (1.0 - fx) + at(c1, r0) * fx;
            let bottom = at(c0, r1) * (1.0 - fx) + at(c1, r1) * fx;
            top * (1.0 - fy) + bottom * fy
        }
    }
}

/// Line integral result: mean alignment and the fraction of samples whose
/// alignment exceeded the sample threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimbScore {
    pub score: f64,
    pub support: f64,
}

/// Midpoint-rule line integral of the field along `from → to`, sampled at
/// `u_i = (i + 1/2) / n`.
pub fn line_integral(
    paf: PafView<'_>,
    from: Point,
    to: Point,
    n_samples: usize,
    interpolation: Interpolation,
    sample_threshold: f64,
) -> Result<LimbScore, AssociateError> {
    if n_samples < 2 {
        return Err(AssociateError::TooFewSamples(n_samples));
    }
    let delta = to - from;
    let length = delta.norm();
    if length == 0.0 {
        return Err(AssociateError::CoincidentCandidates(from.x, from.y));
    }
    let dir = delta / length;
    let n = n_samples as f64;
    let mut sum = 0.0;
    let mut supporting = 0usize;
    for i in 0..n_samples {
        let u = (i as f64 + 0.5) / n;
        let dot = sample_field(paf, from.lerp(to, u), interpolation).dot(dir);
        sum += dot;
        if dot > sample_threshold {
            supporting += 1;
        }
    }
    Ok(LimbScore { score: sum / n, support: supporting as f64 / n })
}

/// Association score `E` with bilinear reads.
pub fn line_integral_score(
    paf: PafView<'_>,
    from: Point,
    to: Point,
    n_samples: usize,
) -> Result<f64, AssociateError> {
    line_integral(paf, from, to, n_samples, Interpolation::Bilinear, 0.0).map(|s| s.score)
}

/// `E_mn` for every source/destination candidate pair, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub rows: usize,
    pub cols: usize,
    pub scores: Vec<f64>,
    pub support: Vec<f64>,
}

impl ScoreMatrix {
    /// Matrix with full support everywhere.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let scores: Vec<f64> = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.as_ref().len(), cols, "ragged score matrix");
                r.as_ref().iter().copied()
            })
            .collect();
        let support = vec![1.0; scores.len()];
        Self { rows: rows.len(), cols, scores, support }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self { rows, cols, scores: vec![0.0; rows * cols], support: vec![0.0; rows * cols] }
    }

    pub fn score(&self, m: usize, n: usize) -> f64 {
        self.scores[m * self.cols + n]
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn eligible(&self, m: usize, n: usize, acceptance: &Acceptance) -> bool {
        let i = m * self.cols + n;
        self.scores[i] > acceptance.min_score
            && self.scores[i] > 0.0
            && self.support[i] >= acceptance.min_support
    }

    pub fn total(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(m, n)| self.score(m, n)).sum()
    }
}

/// Scores every pair of candidates of the limb's two parts. Pairs at the same
/// position score zero with no support.
pub fn score_matrix(
    paf: PafView<'_>,
    sources: &[PartCandidate],
    destinations: &[PartCandidate],
    config: &AssociationConfig,
) -> ScoreMatrix {
    let mut matrix = ScoreMatrix::empty(sources.len(), destinations.len());
    for (m, a) in sources.iter().enumerate() {
        for (n, b) in destinations.iter().enumerate() {
            if let Ok(s) = line_integral(
                paf,
                a.position,
                b.position,
                config.n_samples,
                config.interpolation,
                config.sample_threshold,
            ) {
                matrix.scores[m * matrix.cols + n] = s.score;
                matrix.support[m * matrix.cols + n] = s.support;
            }
        }
    }
    matrix
}

/// Maximum-weight one-to-one partial matching over eligible pairs.
///
/// Ineligible pairs get weight zero, so the optimal full assignment of the
/// zero-padded square matrix is an optimal partial matching; zero-weight pairs
/// are dropped from the result. Returned pairs are sorted by row.
pub fn hungarian_match(matrix: &ScoreMatrix, acceptance: &Acceptance) -> Vec<(usize, usize)> {
    if matrix.is_empty() {
        return Vec::new();
    }
    let n = matrix.rows.max(matrix.cols);
    let weight = |i: usize, j: usize| {
        if i < matrix.rows && j < matrix.cols && matrix.eligible(i, j, acceptance) {
            matrix.score(i, j)
        } else {
            0.0
        }
    };
    let assignment = min_cost_assignment(n, |i, j| -weight(i, j));
    let mut pairs: Vec<_> = assignment
        .into_iter()
        .enumerate()
        .filter(|&(i, j)| weight(i, j) > 0.0)
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Shortest-augmenting-path Hungarian method with row/column potentials on a
/// dense `n × n` cost. Returns the column assigned to each row.
fn min_cost_assignment(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // 1-based arrays; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

/// Accepts eligible pairs in descending score order (ties by `(m, n)`)
/// whenever both endpoints are still free. Returned pairs are sorted by row.
pub fn greedy_match(matrix: &ScoreMatrix, acceptance: &Acceptance) -> Vec<(usize, usize)> {
    let mut order: Vec<(usize, usize)> = (0..matrix.rows)
        .flat_map(|m| (0..matrix.cols).map(move |n| (m, n)))
        .filter(|&(m, n)| matrix.eligible(m, n, acceptance))
        .collect();
    order.sort_by(|&a, &b| matrix.score(b.0, b.1).total_cmp(&matrix.score(a.0, a.1)).then(a.cmp(&b)));
    let mut row_used = vec![false; matrix.rows];
    let mut col_used = vec![false; matrix.cols];
    let mut pairs = Vec::new();
    for (m, n) in order {
        if !row_used[m] && !col_used[n] {
            row_used[m] = true;
            col_used[n] = true;
            pairs.push((m, n));
        }
    }
    pairs.sort_unstable();
    pairs
}

pub fn match_limb(
    matrix: &ScoreMatrix,
    matcher: Matcher,
    acceptance: &Acceptance,
) -> Vec<(usize, usize)> {
    match matcher {
        Matcher::Hungarian => hungarian_match(matrix, acceptance),
        Matcher::Greedy => greedy_match(matrix, acceptance),
    }
}

/// An accepted connection `z_{j1 j2}^{mn} = 1` of limb type `limb`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimbConnection {
    pub limb: usize,
    pub src: usize,
    pub dst: usize,
    pub score: f64,
}
