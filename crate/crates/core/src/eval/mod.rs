//! Synthetic scenes, keypoint metrics, round-trip and strategy-comparison
//! suites, and the parse latency benchmark.

mod bench;
mod compare;
pub mod metrics;
mod scene;
mod suite;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::PartCandidate;
use crate::fields::{FieldError, Grid};
use crate::geometry::Point;
use crate::parse::{ParseError, PersonParse};
use crate::topology::TopologyError;

pub use bench::{bench_parse, bench_scene_spec, latency_csv, LatencyStats};
pub use compare::{
    compare_strategies, mini5_scene_spec, CompareTargets, random_score_instances, rendered_instances, ParseInstance,
    RandomInstanceSpec, Strategy,
};
pub use scene::{builtin_template, random_scene, SceneSpec, TopologySource};
pub use suite::{parse_scene, roundtrip_suite, Evaluation, RoundtripTargets, SceneParse, ScenePipeline};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("could not place {people} people for seed {seed}")]
    InfeasibleSpec { people: usize, seed: u64 },
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("ground-truth person has no annotated parts")]
    NoAnnotatedParts,
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("benchmark needs at least one repetition")]
    EmptyBenchmark,
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Per-part OKS constants; missing entries use [`metrics::DEFAULT_KAPPA`].
    pub kappas: Vec<f64>,
    /// PCKh head size as a fraction of the person scale.
    pub head_fraction: f64,
    pub pckh_alpha: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { kappas: Vec::new(), head_fraction: 0.25, pckh_alpha: 0.5 }
    }
}

/// Image-space keypoints of a parsed person.
pub fn person_keypoints(
    person: &PersonParse,
    candidates: &[Vec<PartCandidate>],
    grid: &Grid,
) -> Vec<Option<Point>> {
    person
        .parts
        .iter()
        .enumerate()
        .map(|(j, m)| m.map(|m| grid.to_image(candidates[j][m].position)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStats {
    pub oks: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub ap: Option<f64>,
}

/// A pass/fail assertion carried by a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub bound: f64,
    pub pass: bool,
    /// Depends on wall-clock measurements.
    #[serde(default)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyStats {
    pub name: String,
    pub total_score: f64,
    pub persons: usize,
    pub mean_ap: Option<f64>,
    /// Total score relative to the exhaustive strategy.
    pub score_ratio: Option<f64>,
    /// Instances whose person partition equals the exhaustive one.
    pub identical_partitions: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub label: String,
    pub scenes: usize,
    pub gt_persons: usize,
    pub predicted_persons: usize,
    pub thresholds: Vec<ThresholdStats>,
    pub mean_ap: Option<f64>,
    /// Person recall at OKS 0.5; `None` when there is no ground truth.
    pub recall: Option<f64>,
    /// Unmatched predictions at OKS 0.5.
    pub false_positives: usize,
    pub mean_keypoint_error_px: Option<f64>,
    pub max_keypoint_error_px: Option<f64>,
    pub keypoint_recall: Option<f64>,
    pub pckh: Option<f64>,
    pub strategies: Vec<StrategyStats>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub wall_ms: f64,
}

impl MatchReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Copy with every wall-clock derived value cleared, for reproducibility
    /// digests.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.wall_ms = 0.0;
        for s in &mut r.strategies {
            s.wall_ms = 0.0;
        }
        r.checks.retain(|c| !c.timing);
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned-column text rendering.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.4}"));
        let mut s = String::new();
        let _ = writeln!(s, "{} ({} scenes)", self.label, self.scenes);
        let _ = writeln!(s, "  {:<26}{}", "ground-truth persons", self.gt_persons);
        let _ = writeln!(s, "  {:<26}{}", "predicted persons", self.predicted_persons);
        let _ = writeln!(s, "  {:<26}{}", "recall@0.5", opt(self.recall));
        let _ = writeln!(s, "  {:<26}{}", "false positives@0.5", self.false_positives);
        let _ = writeln!(s, "  {:<26}{}", "mean AP", opt(self.mean_ap));
        let _ = writeln!(s, "  {:<26}{}", "mean keypoint error px", opt(self.mean_keypoint_error_px));
        let _ = writeln!(s, "  {:<26}{}", "max keypoint error px", opt(self.max_keypoint_error_px));
        let _ = writeln!(s, "  {:<26}{}", "keypoint recall", opt(self.keypoint_recall));
        let _ = writeln!(s, "  {:<26}{}", "PCKh@0.5", opt(self.pckh));
        if !self.thresholds.is_empty() {
            let _ = writeln!(s, "  {:>6} {:>6} {:>6} {:>6} {:>10} {:>8} {:>8}", "OKS", "TP", "FP", "FN", "precision", "recall", "AP");
            for t in &self.thresholds {
                let _ = writeln!(
                    s,
                    "  {:>6.2} {:>6} {:>6} {:>6} {:>10} {:>8} {:>8}",
                    t.oks,
                    t.true_positives,
                    t.false_positives,
                    t.false_negatives,
                    opt(t.precision),
                    opt(t.recall),
                    opt(t.ap)
                );
            }
        }
        if !self.strategies.is_empty() {
            let _ = writeln!(s, "  {:<24} {:>12} {:>8} {:>8} {:>10} {:>10}", "strategy", "total score", "ratio", "persons", "same-part", "wall ms");
            for st in &self.strategies {
                let _ = writeln!(
                    s,
                    "  {:<24} {:>12.4} {:>8} {:>8} {:>10} {:>10.3}",
                    st.name,
                    st.total_score,
                    opt(st.score_ratio),
                    st.persons,
                    st.identical_partitions,
                    st.wall_ms
                );
            }
        }
        for c in &self.checks {
            let _ = writeln!(
                s,
                "  [{}] {} = {} (bound {})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                opt(c.value),
                c.bound
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        s
    }

    /// `oks,precision,recall,ap` rows.
    pub fn ap_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.6}"));
        let mut s = String::from("oks,precision,recall,ap\n");
        for t in &self.thresholds {
            s.push_str(&format!("{:.2},{},{},{}\n", t.oks, cell(t.precision), cell(t.recall), cell(t.ap)));
        }
        s
    }
}
