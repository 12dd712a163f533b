use std::process::{Command, Output};

fn paf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paf")).args(args).output().expect("spawn paf")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn one_person_scene_parses_to_one_person() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"people": [1, 1], "seed": 3}"#).unwrap();
    let gen_dir = dir.path().join("out");
    let summary = json(&paf(&["gen", "--spec", spec.to_str().unwrap(), "--out", gen_dir.to_str().unwrap()]));
    assert_eq!(summary["people"], 1);

    let fields = gen_dir.join("fields.paff");
    let poses = json(&paf(&["parse", fields.to_str().unwrap()]));
    assert_eq!(poses["people"].as_array().unwrap().len(), 1);
    assert_eq!(poses["topology"]["name"], "coco18");
    assert_eq!(poses["people"][0]["keypoints"].as_array().unwrap().len(), 18);

    let cands = dir.path().join("c.json");
    assert!(paf(&["detect", fields.to_str().unwrap(), "--out", cands.to_str().unwrap()]).status.success());
    let via = json(&paf(&["parse", fields.to_str().unwrap(), "--candidates", cands.to_str().unwrap()]));
    assert_eq!(via, poses);

    // Keypoints land on the generated scene.
    let scene: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(gen_dir.join("scene.json")).unwrap()).unwrap();
    let gt = &scene["people"][0]["parts"];
    let kp = &poses["people"][0]["keypoints"];
    for j in 0..18 {
        let (g, p) = (&gt[j], &kp[j]);
        if g.is_null() {
            continue;
        }
        let dx = g["x"].as_f64().unwrap() - p[0].as_f64().unwrap();
        let dy = g["y"].as_f64().unwrap() - p[1].as_f64().unwrap();
        assert!(dx.hypot(dy) < 0.5, "part {j}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let out = paf(&["parse", "x.paff", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(out.stdout.is_empty());
    assert_eq!(paf(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(paf(&["parse", "x.paff", "--matcher", "auction"]).status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.paff");
    let out = paf(&["detect", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());

    let junk = dir.path().join("junk.paff");
    std::fs::write(&junk, b"PAFX").unwrap();
    assert_eq!(paf(&["parse", junk.to_str().unwrap()]).status.code(), Some(2));

    let gen_dir = dir.path().join("g");
    assert!(paf(&["gen", "--seed", "1", "--out", gen_dir.to_str().unwrap()]).status.success());
    let fields = gen_dir.join("fields.paff");
    let out = paf(&["detect", fields.to_str().unwrap(), "--topology", "body25"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("topology"));
}

#[test]
fn failed_checks_exit_three() {
    let out = paf(&["compare", "--instances", "40", "--min-ratio", "1.5"]);
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["checks"][0]["pass"], false);

    let ok = paf(&["roundtrip", "--scenes", "3", "--human"]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("[PASS] recall@0.5"));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("lat.csv");
    let stats = json(&paf(&["bench", "--people", "1,2", "--reps", "3", "--csv", csv.to_str().unwrap()]));
    assert_eq!(stats.as_array().unwrap().len(), 2);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("n_people,reps,mean_ms,p50_ms,p95_ms\n1,3,"));
}
