//! Seeded synthetic scenes.
//!
//! People are articulated down the spanning tree from the root part: each
//! tree limb takes the template offset between its endpoints, perturbed in
//! length and angle, then the whole person is rotated, scaled and placed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::fields::{Keypoint, Person, Scene};
use crate::geometry::Point;
use crate::topology::{builtin, EdgeClassification, RawTopology, SkeletonTopology};

/// Where a scene spec takes its skeleton from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologySource {
    Builtin(String),
    Inline(RawTopology),
}

impl Default for TopologySource {
    fn default() -> Self {
        TopologySource::Builtin("coco18".to_owned())
    }
}

impl TopologySource {
    pub fn resolve(&self) -> Result<SkeletonTopology, EvalError> {
        Ok(match self {
            TopologySource::Builtin(name) => builtin::by_name(name)?,
            TopologySource::Inline(raw) => SkeletonTopology::validate(raw)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub seed: u64,
    /// Inclusive range of people per scene.
    pub people: [usize; 2],
    /// Inclusive range of person size in pixels (template height 1).
    pub scale: [f64; 2],
    pub width: usize,
    pub height: usize,
    /// Minimum distance between same-part keypoints of different people.
    pub min_separation: f64,
    /// When set, person bounding boxes stay at least this far apart.
    pub bbox_gap: Option<f64>,
    /// When set, each person after the first overlaps an earlier one by
    /// between half this and this fraction of the smaller box; no pair
    /// overlaps more.
    pub forced_overlap: Option<f64>,
    /// Distance kept from the image border.
    pub margin: f64,
    pub topology: TopologySource,
    /// Canonical part positions at unit scale; defaults to the built-in
    /// template of the topology when one exists.
    pub template: Option<Vec<[f64; 2]>>,
    /// Limb length used when no template is available, relative to scale.
    pub default_limb_length: f64,
    /// Relative limb length jitter, uniform in `±length_jitter`.
    pub length_jitter: f64,
    /// Per-limb angle jitter in radians.
    pub angle_jitter: f64,
    /// Whole-person rotation jitter in radians.
    pub rotation_jitter: f64,
    /// Probability that a part is left unlabeled.
    pub part_dropout: f64,
    /// `[part, a, b]`: place `part` at the midpoint of `a` and `b`.
    pub midpoints: Vec<[String; 3]>,
    pub max_attempts: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            people: [1, 8],
            scale: [80.0, 120.0],
            width: 368,
            height: 368,
            min_separation: 40.0,
            bbox_gap: Some(18.0),
            forced_overlap: None,
            margin: 4.0,
            topology: TopologySource::default(),
            template: None,
            default_limb_length: 0.25,
            length_jitter: 0.1,
            angle_jitter: 0.15,
            rotation_jitter: 0.2,
            part_dropout: 0.0,
            midpoints: Vec::new(),
            max_attempts: 400,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidSpec(m.to_owned()));
        if self.people[0] > self.people[1] {
            return bad("people range is empty");
        }
        if !(self.scale[0] > 0.0 && self.scale[0] <= self.scale[1]) {
            return bad("scale range must be positive and non-empty");
        }
        if self.width == 0 || self.height == 0 {
            return bad("grid must be non-empty");
        }
        if !(0.0..=1.0).contains(&self.part_dropout) {
            return bad("part_dropout must be in [0, 1]");
        }
        if let Some(f) = self.forced_overlap {
            if !(f > 0.0 && f <= 1.0) {
                return bad("forced_overlap must be in (0, 1]");
            }
        }
        Ok(())
    }

    /// Copy of this scene spec for scene number `index` of a suite.
    pub fn for_scene(&self, index: usize) -> Self {
        Self { seed: self.seed.wrapping_add(index as u64), ..self.clone() }
    }
}

/// Template positions (unit height, neck at the origin, y down).
pub fn builtin_template(name: &str) -> Option<Vec<[f64; 2]>> {
    let coco: [[f64; 2]; 18] = [
        [0.0, -0.10],
        [0.0, 0.0],
        [-0.11, 0.01],
        [-0.14, 0.17],
        [-0.15, 0.32],
        [0.11, 0.01],
        [0.14, 0.17],
        [0.15, 0.32],
        [-0.07, 0.33],
        [-0.08, 0.55],
        [-0.08, 0.78],
        [0.07, 0.33],
        [0.08, 0.55],
        [0.08, 0.78],
        [-0.035, -0.135],
        [0.035, -0.135],
        [-0.07, -0.115],
        [0.07, -0.115],
    ];
    match name {
        "coco18" | "coco18-tree" => Some(coco.to_vec()),
        "body25" => {
            // COCO order with MidHip inserted at 8 and feet appended.
            let mut t = coco[..8].to_vec();
            t.push([0.0, 0.33]);
            t.extend_from_slice(&coco[8..]);
            t.extend_from_slice(&[
                [0.10, 0.83],
                [0.13, 0.82],
                [0.07, 0.81],
                [-0.10, 0.83],
                [-0.13, 0.82],
                [-0.07, 0.81],
            ]);
            Some(t)
        }
        "vehicle12" => Some(vec![
            [0.0, -0.25],
            [-0.35, 0.2],
            [0.35, 0.2],
            [-0.3, 0.3],
            [0.3, 0.3],
            [-0.45, 0.05],
            [0.45, 0.05],
            [-0.25, 0.12],
            [0.25, 0.12],
            [-0.2, -0.2],
            [0.2, -0.2],
            [0.0, -0.15],
        ]),
        _ => None,
    }
}

fn builtin_midpoints(name: &str) -> Vec<[String; 3]> {
    match name {
        "body25" => vec![["MidHip".into(), "RHip".into(), "LHip".into()]],
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, Copy)]
struct Bbox {
    min: Point,
    max: Point,
}

impl Bbox {
    fn of(points: &[Point]) -> Self {
        let mut b = Bbox { min: points[0], max: points[0] };
        for p in points {
            b.min = Point::new(b.min.x.min(p.x), b.min.y.min(p.y));
            b.max = Point::new(b.max.x.max(p.x), b.max.y.max(p.y));
        }
        b
    }

    fn size(&self) -> Point {
        self.max - self.min
    }

    fn area(&self) -> f64 {
        let s = self.size();
        s.x.max(1.0) * s.y.max(1.0)
    }

    fn gap(&self, o: &Bbox) -> f64 {
        let dx = (o.min.x - self.max.x).max(self.min.x - o.max.x);
        let dy = (o.min.y - self.max.y).max(self.min.y - o.max.y);
        dx.max(dy)
    }

    fn overlap_fraction(&self, o: &Bbox) -> f64 {
        let w = (self.max.x.min(o.max.x) - self.min.x.max(o.min.x)).max(0.0);
        let h = (self.max.y.min(o.max.y) - self.min.y.max(o.min.y)).max(0.0);
        w * h / self.area().min(o.area())
    }
}

struct Resolved {
    topology: SkeletonTopology,
    classes: EdgeClassification,
    template: Option<Vec<Point>>,
    midpoints: Vec<[usize; 3]>,
}

fn resolve(spec: &SceneSpec) -> Result<Resolved, EvalError> {
    let topology = spec.topology.resolve()?;
    let classes = topology.classify_edges(topology.default_root())?;
    let builtin_name = match &spec.topology {
        TopologySource::Builtin(name) => Some(name.as_str()),
        TopologySource::Inline(_) => None,
    };
    let template = spec
        .template
        .clone()
        .or_else(|| builtin_name.and_then(builtin_template))
        .map(|t| t.into_iter().map(|[x, y]| Point::new(x, y)).collect::<Vec<_>>());
    if let Some(t) = &template {
        if t.len() != topology.num_parts() {
            return Err(EvalError::InvalidSpec(format!(
                "template has {} points, topology has {} parts",
                t.len(),
                topology.num_parts()
            )));
        }
    }
    let named = if spec.midpoints.is_empty() {
        builtin_name.map(builtin_midpoints).unwrap_or_default()
    } else {
        spec.midpoints.clone()
    };
    let midpoints = named
        .iter()
        .map(|triple| {
            let mut idx = [0; 3];
            for (slot, name) in idx.iter_mut().zip(triple) {
                *slot = topology.part_index(name).ok_or_else(|| {
                    EvalError::InvalidSpec(format!("midpoint names unknown part {name:?}"))
                })?;
            }
            Ok(idx)
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(Resolved { topology, classes, template, midpoints })
}

fn articulate(rng: &mut ChaCha8Rng, spec: &SceneSpec, r: &Resolved) -> Vec<Point> {
    let topo = &r.topology;
    let mut pos = vec![Point::default(); topo.num_parts()];
    let mut placed = vec![false; topo.num_parts()];
    placed[r.classes.root] = true;
    for &c in &r.classes.tree_edges {
        let limb = topo.limbs()[c];
        let (parent, child) = if placed[limb.src] { (limb.src, limb.dst) } else { (limb.dst, limb.src) };
        let base = match &r.template {
            Some(t) => t[child] - t[parent],
            None => Point::new(spec.default_limb_length, 0.0)
                .rotate(rng.gen_range(0.0..std::f64::consts::TAU)),
        };
        let angle = rng.gen_range(-1.0..=1.0) * spec.angle_jitter;
        let stretch = 1.0 + rng.gen_range(-1.0..=1.0) * spec.length_jitter;
        pos[child] = pos[parent] + base.rotate(angle) * stretch;
        placed[child] = true;
    }
    for &[part, a, b] in &r.midpoints {
        pos[part] = pos[a].lerp(pos[b], 0.5);
    }
    let rotation = rng.gen_range(-1.0..=1.0) * spec.rotation_jitter;
    let scale = rng.gen_range(spec.scale[0]..=spec.scale[1]);
    pos.iter().map(|p| p.rotate(rotation) * scale).collect()
}

fn shape_ok(points: &[Point], topo: &SkeletonTopology) -> bool {
    topo.limbs().iter().all(|l| points[l.src].distance(points[l.dst]) >= 1.0)
}

/// One seeded scene.
pub fn random_scene(spec: &SceneSpec) -> Result<Scene, EvalError> {
    spec.validate()?;
    let r = resolve(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_people = rng.gen_range(spec.people[0]..=spec.people[1]);
    let (w, h) = (spec.width as f64, spec.height as f64);

    for _ in 0..spec.max_attempts.max(1) {
        let mut people: Vec<(Vec<Point>, Bbox)> = Vec::with_capacity(n_people);
        'person: for _ in 0..n_people {
            for _ in 0..spec.max_attempts.max(1) {
                let local = articulate(&mut rng, spec, &r);
                if !shape_ok(&local, &r.topology) {
                    continue;
                }
                let local_box = Bbox::of(&local);
                let size = local_box.size();
                let free_x = w - 2.0 * spec.margin - size.x;
                let free_y = h - 2.0 * spec.margin - size.y;
                if free_x <= 0.0 || free_y <= 0.0 {
                    continue;
                }
                let shift = Point::new(
                    spec.margin + rng.gen_range(0.0..free_x) - local_box.min.x,
                    spec.margin + rng.gen_range(0.0..free_y) - local_box.min.y,
                );
                let points: Vec<Point> = local.iter().map(|&p| p + shift).collect();
                let bbox = Bbox::of(&points);
                if admissible(spec, &points, &bbox, &people) {
                    people.push((points, bbox));
                    continue 'person;
                }
            }
            break;
        }
        if people.len() == n_people {
            return Ok(Scene {
                width: spec.width,
                height: spec.height,
                people: people
                    .into_iter()
                    .map(|(points, _)| Person {
                        parts: points
                            .into_iter()
                            .map(|p| {
                                let keep = spec.part_dropout == 0.0
                                    || !rng.gen_bool(spec.part_dropout);
                                keep.then(|| Keypoint::new(p.x, p.y))
                            })
                            .collect(),
                    })
                    .collect(),
            });
        }
    }
    Err(EvalError::InfeasibleSpec { people: n_people, seed: spec.seed })
}

fn admissible(spec: &SceneSpec, points: &[Point], bbox: &Bbox, placed: &[(Vec<Point>, Bbox)]) -> bool {
    let separated = placed.iter().all(|(other, _)| {
        points.iter().zip(other).all(|(a, b)| a.distance(*b) >= spec.min_separation)
    });
    if !separated {
        return false;
    }
    if let Some(gap) = spec.bbox_gap {
        if placed.iter().any(|(_, b)| bbox.gap(b) < gap) {
            return false;
        }
    }
    if let Some(f) = spec.forced_overlap {
        if placed.iter().any(|(_, b)| bbox.overlap_fraction(b) > f) {
            return false;
        }
        if !placed.is_empty() && !placed.iter().any(|(_, b)| bbox.overlap_fraction(b) >= f / 2.0) {
            return false;
        }
    }
    true
}
