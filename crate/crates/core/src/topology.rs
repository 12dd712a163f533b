//! Keypoint skeletons: part names, limb edges and the PAF channel layout.
//!
//! A [`SkeletonTopology`] is validated once and then shared read-only. Limb
//! `c` owns the PAF planes `2c` (x component) and `2c + 1` (y component);
//! confidence plane `j` belongs to part `j`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("part {0:?} is declared more than once")]
    DuplicatePart(String),
    #[error("limb {limb} references undeclared part {part:?}")]
    UnknownPartInLimb { limb: usize, part: String },
    #[error("limb {limb} connects part {part:?} to itself")]
    SelfLoop { limb: usize, part: String },
    #[error("limb {limb} duplicates the pair ({a:?}, {b:?})")]
    DuplicateLimb { limb: usize, a: String, b: String },
    #[error("root part {0:?} is not declared")]
    UnknownRoot(String),
    #[error("topology has no parts")]
    Empty,
    #[error("parts unreachable from root {root:?}: {unreachable:?}")]
    DisconnectedGraph { root: String, unreachable: Vec<String> },
    #[error("unknown built-in topology {0:?}")]
    UnknownBuiltin(String),
    #[error("malformed topology description: {0}")]
    Malformed(String),
}

/// Topology as written in a topology file, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTopology {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub parts: Vec<String>,
    pub limbs: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<String>,
}

impl RawTopology {
    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        serde_json::from_str(text).map_err(|e| TopologyError::Malformed(e.to_string()))
    }
}

/// A directed limb between two part indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Limb {
    pub src: usize,
    pub dst: usize,
}

impl Limb {
    /// PAF plane indices `(x, y)` of limb number `index`.
    pub fn channels(index: usize) -> (usize, usize) {
        (2 * index, 2 * index + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTopology {
    name: String,
    parts: Vec<String>,
    limbs: Vec<Limb>,
    root: Option<usize>,
}

impl SkeletonTopology {
    pub fn validate(raw: &RawTopology) -> Result<Self, TopologyError> {
        if raw.parts.is_empty() {
            return Err(TopologyError::Empty);
        }
        let mut index = HashMap::with_capacity(raw.parts.len());
        for (j, part) in raw.parts.iter().enumerate() {
            if index.insert(part.as_str(), j).is_some() {
                return Err(TopologyError::DuplicatePart(part.clone()));
            }
        }
        let lookup = |limb: usize, part: &String| {
            index
                .get(part.as_str())
                .copied()
                .ok_or_else(|| TopologyError::UnknownPartInLimb { limb, part: part.clone() })
        };
        let mut seen = HashSet::new();
        let mut limbs = Vec::with_capacity(raw.limbs.len());
        for (c, [a, b]) in raw.limbs.iter().enumerate() {
            let src = lookup(c, a)?;
            let dst = lookup(c, b)?;
            if src == dst {
                return Err(TopologyError::SelfLoop { limb: c, part: a.clone() });
            }
            if !seen.insert((src.min(dst), src.max(dst))) {
                return Err(TopologyError::DuplicateLimb { limb: c, a: a.clone(), b: b.clone() });
            }
            limbs.push(Limb { src, dst });
        }
        let root = match &raw.root {
            Some(r) => Some(
                index
                    .get(r.as_str())
                    .copied()
                    .ok_or_else(|| TopologyError::UnknownRoot(r.clone()))?,
            ),
            None => None,
        };
        Ok(Self {
            name: raw.name.clone().unwrap_or_else(|| "custom".to_owned()),
            parts: raw.parts.clone(),
            limbs,
            root,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        Self::validate(&RawTopology::from_json(text)?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn parts(&self) -> &[String] {
        &self.parts
    }

    pub fn limbs(&self) -> &[Limb] {
        &self.limbs
    }

    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn num_limbs(&self) -> usize {
        self.limbs.len()
    }

    /// Number of PAF planes, `2C`.
    pub fn paf_channels(&self) -> usize {
        2 * self.limbs.len()
    }

    /// Total planes in a field stack, `J + 2C`.
    pub fn total_channels(&self) -> usize {
        self.parts.len() + self.paf_channels()
    }

    pub fn part_index(&self, name: &str) -> Option<usize> {
        self.parts.iter().position(|p| p == name)
    }

    pub fn limb_index(&self, a: usize, b: usize) -> Option<usize> {
        self.limbs
            .iter()
            .position(|l| (l.src == a && l.dst == b) || (l.src == b && l.dst == a))
    }

    /// Root used when none is given explicitly: the declared root, else a part
    /// named "neck" (case-insensitive), else part 0.
    pub fn default_root(&self) -> usize {
        self.root
            .or_else(|| self.parts.iter().position(|p| p.eq_ignore_ascii_case("neck")))
            .unwrap_or(0)
    }

    pub fn to_raw(&self) -> RawTopology {
        RawTopology {
            name: Some(self.name.clone()),
            parts: self.parts.clone(),
            limbs: self
                .limbs
                .iter()
                .map(|l| [self.parts[l.src].clone(), self.parts[l.dst].clone()])
                .collect(),
            root: self.root.map(|r| self.parts[r].clone()),
        }
    }

    /// Canonical JSON of the field-relevant structure (parts and limbs, in
    /// declaration order). The name and root do not affect the field layout
    /// and are excluded.
    pub fn canonical_json(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            parts: &'a [String],
            limbs: Vec<[&'a str; 2]>,
        }
        let canonical = Canonical {
            parts: &self.parts,
            limbs: self
                .limbs
                .iter()
                .map(|l| [self.parts[l.src].as_str(), self.parts[l.dst].as_str()])
                .collect(),
        };
        serde_json::to_string(&canonical).expect("canonical topology serializes")
    }

    /// 64-bit FNV-1a of [`Self::canonical_json`].
    pub fn hash(&self) -> u64 {
        fnv1a64(self.canonical_json().as_bytes())
    }

    /// Same skeleton with every limb in `drop` removed. Limb indices shift.
    pub fn without_limbs(&self, drop: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            parts: self.parts.clone(),
            limbs: self
                .limbs
                .iter()
                .enumerate()
                .filter(|(c, _)| !drop.contains(c))
                .map(|(_, l)| *l)
                .collect(),
            root: self.root,
        }
    }

    pub fn classify_edges(&self, root: usize) -> Result<EdgeClassification, TopologyError> {
        classify_edges(self, root)
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Split of the limb set into a spanning tree and the remaining
/// (redundant) limbs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeClassification {
    pub root: usize,
    /// Tree limb indices in discovery order; every limb's parent-side part
    /// is discovered before it.
    pub tree_edges: Vec<usize>,
    /// Non-tree limb indices, ascending.
    pub redundant_edges: Vec<usize>,
    /// Parent limb of each part in the tree; `None` for the root.
    pub parent_limb: Vec<Option<usize>>,
}

impl EdgeClassification {
    pub fn is_tree_edge(&self, limb: usize) -> bool {
        self.tree_edges.contains(&limb)
    }

    pub fn is_redundant(&self, limb: usize) -> bool {
        self.redundant_edges.contains(&limb)
    }
}

/// Spanning tree grown from `root`: at every step the earliest-declared limb
/// joining the tree to a new part is taken. Limbs declared late (typically
/// the extra cross-links of a skeleton) therefore end up redundant whenever
/// an earlier path reaches their parts.
pub fn classify_edges(
    topology: &SkeletonTopology,
    root: usize,
) -> Result<EdgeClassification, TopologyError> {
    let n = topology.num_parts();
    if root >= n {
        return Err(TopologyError::UnknownRoot(format!("#{root}")));
    }
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (c, limb) in topology.limbs().iter().enumerate() {
        adjacency[limb.src].push((c, limb.dst));
        adjacency[limb.dst].push((c, limb.src));
    }
    let mut visited = vec![false; n];
    let mut parent_limb = vec![None; n];
    let mut tree_edges = Vec::new();
    let mut frontier: BinaryHeap<Reverse<(usize, usize)>> =
        adjacency[root].iter().map(|&e| Reverse(e)).collect();
    visited[root] = true;
    while let Some(Reverse((c, next))) = frontier.pop() {
        if visited[next] {
            continue;
        }
        visited[next] = true;
        parent_limb[next] = Some(c);
        tree_edges.push(c);
        frontier.extend(adjacency[next].iter().filter(|e| !visited[e.1]).map(|&e| Reverse(e)));
    }
    let unreachable: Vec<String> = (0..n)
        .filter(|&j| !visited[j])
        .map(|j| topology.parts()[j].clone())
        .collect();
    if !unreachable.is_empty() {
        return Err(TopologyError::DisconnectedGraph {
            root: topology.parts()[root].clone(),
            unreachable,
        });
    }
    let redundant_edges = (0..topology.num_limbs())
        .filter(|c| !tree_edges.contains(c))
        .collect();
    Ok(EdgeClassification { root, tree_edges, redundant_edges, parent_limb })
}

/// Built-in keypoint configurations.
pub mod builtin {
    use super::{RawTopology, SkeletonTopology, TopologyError};

    pub const NAMES: &[&str] = &["coco18", "coco18-tree", "body25", "vehicle12"];

    pub fn by_name(name: &str) -> Result<SkeletonTopology, TopologyError> {
        match name {
            "coco18" => Ok(coco18()),
            "coco18-tree" => Ok(coco18_tree()),
            "body25" => Ok(body25()),
            "vehicle12" => Ok(vehicle12()),
            other => Err(TopologyError::UnknownBuiltin(other.to_owned())),
        }
    }

    fn build(name: &str, parts: &[&str], limbs: &[(usize, usize)]) -> SkeletonTopology {
        let raw = RawTopology {
            name: Some(name.to_owned()),
            parts: parts.iter().map(|s| (*s).to_owned()).collect(),
            limbs: limbs
                .iter()
                .map(|&(a, b)| [parts[a].to_owned(), parts[b].to_owned()])
                .collect(),
            root: None,
        };
        SkeletonTopology::validate(&raw).expect("built-in topology is valid")
    }

    pub const COCO18_PARTS: [&str; 18] = [
        "Nose", "Neck", "RShoulder", "RElbow", "RWrist", "LShoulder", "LElbow", "LWrist", "RHip",
        "RKnee", "RAnkle", "LHip", "LKnee", "LAnkle", "REye", "LEye", "REar", "LEar",
    ];

    const COCO18_TREE_LIMBS: [(usize, usize); 17] = [
        (1, 2),
        (1, 5),
        (2, 3),
        (3, 4),
        (5, 6),
        (6, 7),
        (1, 8),
        (8, 9),
        (9, 10),
        (1, 11),
        (11, 12),
        (12, 13),
        (1, 0),
        (0, 14),
        (14, 16),
        (0, 15),
        (15, 17),
    ];

    /// 18 parts, 19 limbs: the 17-limb tree plus the two ear–shoulder
    /// redundant connections.
    pub fn coco18() -> SkeletonTopology {
        let mut limbs = COCO18_TREE_LIMBS.to_vec();
        limbs.extend([(2, 16), (5, 17)]);
        build("coco18", &COCO18_PARTS, &limbs)
    }

    pub fn coco18_tree() -> SkeletonTopology {
        build("coco18-tree", &COCO18_PARTS, &COCO18_TREE_LIMBS)
    }

    pub const BODY25_PARTS: [&str; 25] = [
        "Nose", "Neck", "RShoulder", "RElbow", "RWrist", "LShoulder", "LElbow", "LWrist",
        "MidHip", "RHip", "RKnee", "RAnkle", "LHip", "LKnee", "LAnkle", "REye", "LEye", "REar",
        "LEar", "LBigToe", "LSmallToe", "LHeel", "RBigToe", "RSmallToe", "RHeel",
    ];

    /// Body plus six foot keypoints; `MidHip` is the hip midpoint.
    pub fn body25() -> SkeletonTopology {
        let limbs = [
            (1, 8),
            (1, 2),
            (1, 5),
            (2, 3),
            (3, 4),
            (5, 6),
            (6, 7),
            (8, 9),
            (9, 10),
            (10, 11),
            (8, 12),
            (12, 13),
            (13, 14),
            (1, 0),
            (0, 15),
            (15, 17),
            (0, 16),
            (16, 18),
            (2, 17),
            (5, 18),
            (14, 19),
            (19, 20),
            (14, 21),
            (11, 22),
            (22, 23),
            (11, 24),
        ];
        build("body25", &BODY25_PARTS, &limbs)
    }

    pub const VEHICLE12_PARTS: [&str; 12] = [
        "RoofCenter",
        "FrontLeftWheel",
        "FrontRightWheel",
        "RearLeftWheel",
        "RearRightWheel",
        "LeftHeadlight",
        "RightHeadlight",
        "LeftTaillight",
        "RightTaillight",
        "FrontLeftRoof",
        "FrontRightRoof",
        "RearRoof",
    ];

    /// Vehicle keypoints rooted at the roof centre, with two redundant
    /// wheel-to-wheel connections.
    pub fn vehicle12() -> SkeletonTopology {
        let limbs = [
            (0, 9),
            (0, 10),
            (0, 11),
            (9, 5),
            (10, 6),
            (5, 1),
            (6, 2),
            (11, 7),
            (11, 8),
            (7, 3),
            (8, 4),
            (1, 3),
            (2, 4),
        ];
        let mut raw = build("vehicle12", &VEHICLE12_PARTS, &limbs).to_raw();
        raw.root = Some("RoofCenter".to_owned());
        SkeletonTopology::validate(&raw).expect("built-in topology is valid")
    }
}
