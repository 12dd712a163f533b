use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{average_precision, match_by_similarity, oks, oks_thresholds, person_scale, pckh};
use super::{person_keypoints, random_scene, Check, EvalConfig, EvalError, MatchReport, SceneSpec, ThresholdStats};
use crate::detect::{detect_candidates, DetectConfig, PartCandidate};
use crate::fields::{render_scene_fields, FieldStack, Grid, RenderParams, Scene};
use crate::geometry::Point;
use crate::parse::{parse_poses, ParseConfig, ParseResult};
use crate::topology::{EdgeClassification, SkeletonTopology};

/// Settings for render → detect → parse.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenePipeline {
    pub render: RenderParams,
    pub detect: DetectConfig,
    pub parse: ParseConfig,
}

pub struct SceneParse {
    pub stack: FieldStack,
    pub grid: Grid,
    pub candidates: Vec<Vec<PartCandidate>>,
    pub result: ParseResult,
}

impl SceneParse {
    /// Parsed people as `(image-space keypoints, score)`.
    pub fn predictions(&self) -> Vec<(Vec<Option<Point>>, f64)> {
        self.result
            .persons
            .iter()
            .map(|p| (person_keypoints(p, &self.candidates, &self.grid), p.score))
            .collect()
    }
}

pub fn parse_scene(
    scene: &Scene,
    topology: &SkeletonTopology,
    classes: &EdgeClassification,
    pipeline: &ScenePipeline,
) -> Result<SceneParse, EvalError> {
    let stack = render_scene_fields(scene, topology, &pipeline.render)?;
    let grid = Grid::for_image(scene.width, scene.height, pipeline.render.stride)?;
    let candidates = detect_candidates(&stack, &pipeline.detect);
    let result = parse_poses(&candidates, &stack, topology, classes, &pipeline.parse)?;
    Ok(SceneParse { stack, grid, candidates, result })
}

#[derive(Debug, Clone, Default)]
struct ThresholdTally {
    tp: usize,
    fp: usize,
    fn_: usize,
    detections: Vec<(f64, bool)>,
}

/// Accumulates per-scene predictions against ground truth.
#[derive(Debug, Clone)]
pub struct Evaluation {
    config: EvalConfig,
    thresholds: Vec<f64>,
    tallies: Vec<ThresholdTally>,
    errors: Vec<f64>,
    gt_parts: usize,
    gt_parts_found: usize,
    pckh_sum: f64,
    scenes: usize,
    gt_persons: usize,
    predicted: usize,
}

impl Evaluation {
    pub fn new(config: EvalConfig) -> Self {
        let thresholds = oks_thresholds();
        Self {
            config,
            tallies: vec![ThresholdTally::default(); thresholds.len()],
            thresholds,
            errors: Vec::new(),
            gt_parts: 0,
            gt_parts_found: 0,
            pckh_sum: 0.0,
            scenes: 0,
            gt_persons: 0,
            predicted: 0,
        }
    }

    pub fn add_scene(
        &mut self,
        predictions: &[(Vec<Option<Point>>, f64)],
        ground_truth: &[Vec<Option<Point>>],
    ) -> Result<(), EvalError> {
        let gts: Vec<(&Vec<Option<Point>>, f64)> = ground_truth
            .iter()
            .filter_map(|g| person_scale(g).map(|s| (g, s)))
            .collect();
        self.scenes += 1;
        self.gt_persons += gts.len();
        self.predicted += predictions.len();

        let sim: Vec<Vec<f64>> = predictions
            .iter()
            .map(|(pred, _)| {
                gts.iter()
                    .map(|&(g, s)| if s > 0.0 { oks(pred, g, s, &self.config.kappas) } else { Ok(0.0) })
                    .collect::<Result<_, _>>()
            })
            .collect::<Result<_, _>>()?;

        for (t, tally) in self.thresholds.iter().zip(&mut self.tallies) {
            let matches = match_by_similarity(&sim, *t);
            let mut hit = vec![false; predictions.len()];
            for &(p, _, _) in &matches {
                hit[p] = true;
            }
            tally.tp += matches.len();
            tally.fp += predictions.len() - matches.len();
            tally.fn_ += gts.len() - matches.len();
            tally.detections.extend(predictions.iter().zip(&hit).map(|((_, s), &h)| (*s, h)));
        }

        let primary = match_by_similarity(&sim, self.thresholds[0]);
        let mut matched_pred = vec![None; gts.len()];
        for &(p, g, _) in &primary {
            matched_pred[g] = Some(p);
        }
        for (g, &(gt, scale)) in gts.iter().enumerate() {
            let annotated = gt.iter().flatten().count();
            self.gt_parts += annotated;
            let Some(p) = matched_pred[g] else { continue };
            let pred = &predictions[p].0;
            for (a, b) in pred.iter().zip(gt.iter()) {
                if let (Some(a), Some(b)) = (a, b) {
                    self.errors.push(a.distance(*b));
                    self.gt_parts_found += 1;
                }
            }
            let head = self.config.head_fraction * scale;
            if head > 0.0 {
                self.pckh_sum += pckh(pred, gt, head, self.config.pckh_alpha)? * annotated as f64;
            }
        }
        Ok(())
    }

    pub fn report(&self, label: &str) -> MatchReport {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let thresholds: Vec<ThresholdStats> = self
            .thresholds
            .iter()
            .zip(&self.tallies)
            .map(|(&t, tally)| ThresholdStats {
                oks: t,
                true_positives: tally.tp,
                false_positives: tally.fp,
                false_negatives: tally.fn_,
                precision: ratio(tally.tp, tally.tp + tally.fp),
                recall: ratio(tally.tp, self.gt_persons),
                ap: average_precision(&tally.detections, self.gt_persons),
            })
            .collect();
        let aps: Vec<f64> = thresholds.iter().filter_map(|t| t.ap).collect();
        let mean_ap = (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64);
        let mut notes = Vec::new();
        if self.gt_persons == 0 {
            notes.push("no ground-truth persons: recall and AP are undefined".to_owned());
        }
        MatchReport {
            label: label.to_owned(),
            scenes: self.scenes,
            gt_persons: self.gt_persons,
            predicted_persons: self.predicted,
            recall: thresholds[0].recall,
            false_positives: thresholds[0].false_positives,
            thresholds,
            mean_ap,
            mean_keypoint_error_px: (!self.errors.is_empty())
                .then(|| self.errors.iter().sum::<f64>() / self.errors.len() as f64),
            max_keypoint_error_px: self.errors.iter().copied().reduce(f64::max),
            keypoint_recall: ratio(self.gt_parts_found, self.gt_parts),
            pckh: (self.gt_parts > 0).then(|| self.pckh_sum / self.gt_parts as f64),
            strategies: Vec::new(),
            checks: Vec::new(),
            notes,
            wall_ms: 0.0,
        }
    }
}

/// Pass criteria for a round-trip run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundtripTargets {
    pub min_recall: f64,
    pub max_false_positives: usize,
    pub max_mean_error_px: f64,
}

impl Default for RoundtripTargets {
    fn default() -> Self {
        Self { min_recall: 0.99, max_false_positives: 0, max_mean_error_px: 1.0 }
    }
}

impl RoundtripTargets {
    pub fn checks(&self, report: &MatchReport) -> Vec<Check> {
        vec![
            Check {
                name: "recall@0.5".into(),
                value: report.recall,
                bound: self.min_recall,
                pass: report.recall.is_none_or(|r| r >= self.min_recall),
                timing: false,
            },
            Check {
                name: "false positives@0.5".into(),
                value: Some(report.false_positives as f64),
                bound: self.max_false_positives as f64,
                pass: report.false_positives <= self.max_false_positives,
                timing: false,
            },
            Check {
                name: "mean keypoint error px".into(),
                value: report.mean_keypoint_error_px,
                bound: self.max_mean_error_px,
                pass: report.mean_keypoint_error_px.is_none_or(|e| e <= self.max_mean_error_px),
                timing: false,
            },
        ]
    }
}

/// Generates `n_scenes` scenes from `spec` (seeds `seed, seed + 1, ...`),
/// renders and parses each one and scores the result against the scene.
/// Scenes are spread over `threads` workers (`0` for all cores); the result
/// does not depend on the worker count.
pub fn roundtrip_suite(
    spec: &SceneSpec,
    n_scenes: usize,
    pipeline: &ScenePipeline,
    eval: &EvalConfig,
    targets: &RoundtripTargets,
    threads: usize,
) -> Result<MatchReport, EvalError> {
    let start = Instant::now();
    let topology = spec.topology.resolve()?;
    let classes = topology.classify_edges(topology.default_root())?;
    type ScenePreds = (Vec<(Vec<Option<Point>>, f64)>, Vec<Vec<Option<Point>>>);
    let run = |i: usize| -> Result<ScenePreds, EvalError> {
        let scene = random_scene(&spec.for_scene(i))?;
        let parsed = parse_scene(&scene, &topology, &classes, pipeline)?;
        let gts = scene
            .people
            .iter()
            .map(|p| p.parts.iter().map(|k| k.map(|k| k.point())).collect())
            .collect();
        Ok((parsed.predictions(), gts))
    };
    let workers = match threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(n_scenes.max(1));
    let mut per_scene: Vec<Option<Result<ScenePreds, EvalError>>> = (0..n_scenes).map(|_| None).collect();
    std::thread::scope(|s| {
        let run = &run;
        let chunks: Vec<_> = per_scene
            .chunks_mut(n_scenes.div_ceil(workers).max(1))
            .enumerate()
            .map(|(c, chunk)| {
                let base = c * n_scenes.div_ceil(workers).max(1);
                s.spawn(move || {
                    for (k, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(run(base + k));
                    }
                })
            })
            .collect();
        for h in chunks {
            h.join().expect("scene worker panicked");
        }
    });
    let mut evaluation = Evaluation::new(eval.clone());
    for r in per_scene {
        let (preds, gts) = r.expect("every scene evaluated")?;
        evaluation.add_scene(&preds, &gts)?;
    }
    let mut report = evaluation.report("roundtrip");
    report.checks = targets.checks(&report);
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}
