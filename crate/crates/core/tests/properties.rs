use paf_core::associate::{greedy_match, hungarian_match, line_integral, Acceptance, Interpolation, ScoreMatrix};
use paf_core::detect::{detect_candidates, nms_peaks, DetectConfig};
use paf_core::eval::metrics::{oks, DEFAULT_KAPPA};
use paf_core::eval::{random_scene, SceneSpec};
use paf_core::fields::{confidence_map_person, render_scene_fields, Grid, Keypoint, Person, RenderParams, Scene};
use paf_core::geometry::Point;
use paf_core::parse::{assemble, parse_poses, ParseConfig};
use paf_core::topology::{builtin, RawTopology, SkeletonTopology};
use proptest::prelude::*;

fn small_scene() -> impl Strategy<Value = Scene> {
    let kp = (0.0..64.0f64, 0.0..48.0f64).prop_map(|(x, y)| Some(Keypoint::new(x, y)));
    let person = prop::collection::vec(prop_oneof![1 => Just(None), 4 => kp], 3)
        .prop_map(|parts| Person { parts });
    prop::collection::vec(person, 0..4).prop_map(|people| Scene { width: 64, height: 48, people })
}

fn chain3() -> SkeletonTopology {
    SkeletonTopology::validate(&RawTopology {
        name: None,
        parts: vec!["a".into(), "b".into(), "c".into()],
        limbs: vec![["a".into(), "b".into()], ["b".into(), "c".into()], ["a".into(), "c".into()]],
        root: None,
    })
    .unwrap()
}

fn render(scene: &Scene) -> Option<paf_core::fields::FieldStack> {
    let params = RenderParams { sigma: 3.0, sigma_limb: 2.0, stride: 1 };
    render_scene_fields(scene, &chain3(), &params).ok()
}

fn brute_force(m: &[Vec<f64>]) -> f64 {
    fn go(m: &[Vec<f64>], row: usize, used: &mut [bool]) -> f64 {
        if row == m.len() {
            return 0.0;
        }
        let mut best = go(m, row + 1, used);
        for c in 0..used.len() {
            if !used[c] && m[row][c] > 0.0 {
                used[c] = true;
                best = best.max(m[row][c] + go(m, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    go(m, 0, &mut vec![false; m.first().map_or(0, Vec::len)])
}

fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::collection::vec((-64i32..=256).prop_map(|k| f64::from(k) / 256.0), c), r)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn person_order_does_not_change_fields(scene in small_scene()) {
        let Some(a) = render(&scene) else { return Ok(()) };
        let mut reversed = scene.clone();
        reversed.people.reverse();
        let b = render(&reversed).unwrap();
        for j in 0..a.num_parts {
            prop_assert_eq!(a.confidence(j), b.confidence(j));
        }
        for (x, y) in a.data.iter().zip(&b.data) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn pafs_are_at_most_unit_length(scene in small_scene()) {
        let Some(stack) = render(&scene) else { return Ok(()) };
        for c in 0..stack.num_limbs {
            let paf = stack.paf(c);
            for (x, y) in paf.x.iter().zip(paf.y) {
                prop_assert!(f64::from(*x).hypot(f64::from(*y)) <= 1.0);
            }
        }
        for v in &stack.data[..stack.num_parts * stack.plane_len()] {
            prop_assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn confidence_decreases_with_distance(cx in 5.0..35.0f64, cy in 5.0..25.0f64, sigma in 1.0..10.0f64) {
        let grid = Grid::new(40, 30);
        let plane = confidence_map_person(Point::new(cx, cy), sigma, grid).unwrap();
        let mut cells: Vec<(f64, f32)> = (0..grid.len())
            .map(|i| {
                let p = grid.cell_center(i % grid.width, i / grid.width);
                (p.distance2(Point::new(cx, cy)), plane.data[i])
            })
            .collect();
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in cells.windows(2) {
            prop_assert!(w[0].1 >= w[1].1);
        }
    }

    #[test]
    fn line_integral_is_antisymmetric(scene in small_scene(), ax in 0.0..63.0f64, ay in 0.0..47.0f64,
                                      bx in 0.0..63.0f64, by in 0.0..47.0f64) {
        let Some(stack) = render(&scene) else { return Ok(()) };
        let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
        prop_assume!(a.distance(b) > 1e-6);
        for c in 0..stack.num_limbs {
            let f = line_integral(stack.paf(c), a, b, 10, Interpolation::Bilinear, 0.0).unwrap().score;
            let r = line_integral(stack.paf(c), b, a, 10, Interpolation::Bilinear, 0.0).unwrap().score;
            prop_assert!((f + r).abs() <= 1e-9, "{} vs {}", f, r);
            prop_assert!(f.abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn hungarian_is_optimal_and_dominates_greedy(m in matrix()) {
        let sm = ScoreMatrix::from_rows(&m);
        let h = hungarian_match(&sm, &Acceptance::POSITIVE);
        let g = greedy_match(&sm, &Acceptance::POSITIVE);
        for pairs in [&h, &g] {
            let mut rows: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let mut cols: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            rows.sort_unstable();
            cols.sort_unstable();
            rows.dedup();
            cols.dedup();
            prop_assert_eq!(rows.len(), pairs.len());
            prop_assert_eq!(cols.len(), pairs.len());
            prop_assert!(pairs.iter().all(|&(r, c)| m[r][c] > 0.0));
        }
        prop_assert_eq!(sm.total(&h), brute_force(&m));
        prop_assert!(sm.total(&h) >= sm.total(&g));
    }

    #[test]
    fn nms_peaks_are_separated(values in prop::collection::vec(0u8..8, 20 * 15), r in 1usize..4) {
        let plane: Vec<f32> = values.iter().map(|&v| f32::from(v) / 8.0).collect();
        let peaks = nms_peaks(&plane, 20, 15, 0.1, r);
        for (i, (p, _)) in peaks.iter().enumerate() {
            for (q, _) in &peaks[i + 1..] {
                let cheb = p.col.abs_diff(q.col).max(p.row.abs_diff(q.row));
                prop_assert!(cheb > r);
            }
        }
    }

    #[test]
    fn oks_is_symmetric_under_part_permutation(
        pts in prop::collection::vec((0.0..100.0f64, 0.0..100.0f64, 0.0..100.0f64, 0.0..100.0f64), 2..8),
        seed in any::<u64>(),
        scale in 1.0..80.0f64,
    ) {
        let gt: Vec<_> = pts.iter().map(|p| Some(Point::new(p.0, p.1))).collect();
        let pred: Vec<_> = pts.iter().map(|p| Some(Point::new(p.2, p.3))).collect();
        let n = gt.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let kappas = vec![DEFAULT_KAPPA; n];
        let base = oks(&pred, &gt, scale, &kappas).unwrap();
        let pg: Vec<_> = perm.iter().map(|&i| gt[i]).collect();
        let pp: Vec<_> = perm.iter().map(|&i| pred[i]).collect();
        let permuted = oks(&pp, &pg, scale, &kappas).unwrap();
        prop_assert!((base - permuted).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn scan_assigns_each_candidate_at_most_once(
        counts in prop::collection::vec(0usize..4, 3),
        scores in prop::collection::vec(-0.3..1.0f64, 3 * 16),
    ) {
        let topo = chain3();
        let classes = topo.classify_edges(0).unwrap();
        let candidates: Vec<Vec<_>> = counts
            .iter()
            .enumerate()
            .map(|(part, &n)| {
                (0..n)
                    .map(|index| paf_core::detect::PartCandidate {
                        part,
                        index,
                        position: Point::new(index as f64, part as f64),
                        score: 0.5,
                    })
                    .collect()
            })
            .collect();
        let matrices: Vec<ScoreMatrix> = topo
            .limbs()
            .iter()
            .enumerate()
            .map(|(c, l)| {
                let (r, k) = (counts[l.src], counts[l.dst]);
                let mut m = ScoreMatrix::empty(r, k);
                for i in 0..r * k {
                    m.scores[i] = scores[c * 16 + i];
                    m.support[i] = 1.0;
                }
                m
            })
            .collect();
        let cfg = ParseConfig::default().unpruned();
        let result = assemble(&candidates, &matrices, &topo, &classes, &cfg).unwrap();
        let mut seen = std::collections::HashSet::new();
        for p in &result.persons {
            prop_assert_eq!(p.part_count, p.parts.iter().flatten().count());
            for r in p.candidate_refs() {
                prop_assert!(seen.insert(r));
            }
            for conn in &p.connections {
                let l = topo.limbs()[conn.limb];
                prop_assert_eq!(p.parts[l.src], Some(conn.src));
                prop_assert_eq!(p.parts[l.dst], Some(conn.dst));
            }
        }
        for r in &result.unassigned {
            prop_assert!(seen.insert(*r));
        }
        prop_assert_eq!(seen.len(), counts.iter().sum::<usize>());
    }

    #[test]
    fn topology_hash_ignores_name(name in "[a-z]{1,8}") {
        let mut raw = builtin::coco18().to_raw();
        raw.name = Some(name);
        prop_assert_eq!(SkeletonTopology::validate(&raw).unwrap().hash(), builtin::coco18().hash());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pipeline_is_deterministic(seed in any::<u64>()) {
        let spec = SceneSpec { seed, people: [1, 4], ..SceneSpec::default() };
        let topo = builtin::coco18();
        let classes = topo.classify_edges(topo.default_root()).unwrap();
        let run = || {
            let scene = random_scene(&spec).unwrap();
            let stack = render_scene_fields(&scene, &topo, &RenderParams::default()).unwrap();
            let cands = detect_candidates(&stack, &DetectConfig::default());
            let parsed = parse_poses(&cands, &stack, &topo, &classes, &ParseConfig::default()).unwrap();
            serde_json::to_string(&(scene, cands, parsed)).unwrap()
        };
        prop_assert_eq!(run(), run());
    }
}
