//! Parse latency on pre-rendered, pre-detected scenes.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{random_scene, EvalError, SceneSpec};
use crate::detect::{detect_candidates, DetectConfig};
use crate::fields::{render_scene_fields, RenderParams};
use crate::parse::{parse_poses, ParseConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub n_people: usize,
    pub reps: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
}

/// Fixed scene layout used by the benchmark: `n` people on the default
/// 18-part skeleton in a 368×368 frame.
pub fn bench_scene_spec(n_people: usize, seed: u64) -> SceneSpec {
    SceneSpec {
        seed,
        people: [n_people, n_people],
        scale: [55.0, 70.0],
        bbox_gap: Some(6.0),
        max_attempts: 4000,
        ..SceneSpec::default()
    }
}

/// Times `parse_poses` alone, `reps` times, on one rendered scene.
pub fn bench_parse(
    n_people: usize,
    reps: usize,
    seed: u64,
    render: &RenderParams,
    config: &ParseConfig,
) -> Result<LatencyStats, EvalError> {
    if reps == 0 {
        return Err(EvalError::EmptyBenchmark);
    }
    let spec = bench_scene_spec(n_people, seed);
    let topology = spec.topology.resolve()?;
    let classes = topology.classify_edges(topology.default_root())?;
    let scene = random_scene(&spec)?;
    let stack = render_scene_fields(&scene, &topology, render)?;
    let candidates = detect_candidates(&stack, &DetectConfig::default());

    // Warm-up, also surfaces errors before timing.
    parse_poses(&candidates, &stack, &topology, &classes, config)?;
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        let r = parse_poses(&candidates, &stack, &topology, &classes, config)?;
        samples.push(t.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(r);
    }
    let mean = samples.iter().sum::<f64>() / reps as f64;
    samples.sort_by(f64::total_cmp);
    let pct = |q: f64| samples[((q * reps as f64).ceil() as usize).clamp(1, reps) - 1];
    Ok(LatencyStats { n_people, reps, mean_ms: mean, p50_ms: pct(0.5), p95_ms: pct(0.95) })
}

pub fn latency_csv(stats: &[LatencyStats]) -> String {
    let mut s = String::from("n_people,reps,mean_ms,p50_ms,p95_ms\n");
    for l in stats {
        s.push_str(&format!("{},{},{:.6},{:.6},{:.6}\n", l.n_people, l.reps, l.mean_ms, l.p50_ms, l.p95_ms));
    }
    s
}
