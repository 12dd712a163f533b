use paf_core::detect::{detect_candidates, DetectConfig};
use paf_core::eval::{
    random_scene, roundtrip_suite, EvalConfig, RoundtripTargets, SceneSpec, ScenePipeline, TopologySource,
};
use paf_core::fields::{render_scene_fields, RenderParams};
use paf_core::io::{decode_fields, encode_fields, PoseFile};
use paf_core::parse::{parse_poses, ParseConfig};
use paf_core::topology::builtin;

#[test]
fn every_builtin_topology_round_trips() {
    for name in builtin::NAMES {
        let spec = SceneSpec {
            seed: 21,
            people: [2, 3],
            topology: TopologySource::Builtin(name.to_string()),
            ..SceneSpec::default()
        };
        let report = roundtrip_suite(
            &spec,
            4,
            &ScenePipeline::default(),
            &EvalConfig::default(),
            &RoundtripTargets::default(),
            0,
        )
        .unwrap();
        assert!(report.passed(), "{name}:\n{}", report.to_text());
        assert_eq!(report.gt_persons, report.predicted_persons, "{name}");
    }
}

#[test]
fn stride_eight_still_recovers_people() {
    let spec = SceneSpec { seed: 4, people: [2, 4], ..SceneSpec::default() };
    let pipeline = ScenePipeline {
        render: RenderParams { sigma: 7.0, sigma_limb: 8.0, stride: 8 },
        ..ScenePipeline::default()
    };
    let report =
        roundtrip_suite(&spec, 5, &pipeline, &EvalConfig::default(), &RoundtripTargets::default(), 0).unwrap();
    // Coarse grids cost localization, not identity.
    assert!(report.recall.unwrap() >= 0.9, "{}", report.to_text());
    assert!(report.mean_keypoint_error_px.unwrap() < 4.0);
}

#[test]
fn overlapping_people_are_reported_not_asserted() {
    let spec = SceneSpec {
        seed: 9,
        people: [2, 4],
        bbox_gap: None,
        min_separation: 10.0,
        forced_overlap: Some(0.3),
        ..SceneSpec::default()
    };
    let report =
        roundtrip_suite(&spec, 10, &ScenePipeline::default(), &EvalConfig::default(), &RoundtripTargets::default(), 0)
            .unwrap();
    assert!(report.gt_persons > 0);
    assert!(report.recall.is_some());
    let ap50 = report.thresholds[0].ap.unwrap();
    let ap95 = report.thresholds[9].ap.unwrap();
    assert!(ap50 >= ap95);
}

#[test]
fn parsed_fields_survive_serialization() {
    let topo = builtin::coco18();
    let scene = random_scene(&SceneSpec { seed: 2, people: [3, 3], ..SceneSpec::default() }).unwrap();
    let stack = render_scene_fields(&scene, &topo, &RenderParams::default()).unwrap();
    let back = decode_fields(&encode_fields(&stack), &topo).unwrap();
    assert_eq!(back, stack);
    let classes = topo.classify_edges(topo.default_root()).unwrap();
    let cands = detect_candidates(&back, &DetectConfig::default());
    let result = parse_poses(&cands, &back, &topo, &classes, &ParseConfig::default()).unwrap();
    let poses = PoseFile::from_parse(&result, &cands, &paf_core::fields::Grid::new(back.width, back.height), &topo);
    assert_eq!(poses.people.len(), 3);
    assert!(poses.people.windows(2).all(|w| w[0].score >= w[1].score));
    assert!(poses.people.iter().all(|p| p.keypoints.len() == 18));
}
