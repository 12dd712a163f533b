//! Multi-person assembly from per-limb connections.
//!
//! [`parse_poses`] matches every limb type independently, then scans all
//! accepted connections in descending score order. A connection that would
//! join two people who already own a candidate of the same part is ignored,
//! which is how redundant limbs veto weaker merges. [`exhaustive_parse`]
//! solves the joint problem by enumeration for small instances.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::associate::{match_limb, score_matrix, AssociationConfig, LimbConnection, Matcher, ScoreMatrix};
use crate::detect::PartCandidate;
use crate::fields::FieldStack;
use crate::topology::{EdgeClassification, SkeletonTopology};

/// Upper bound on `Π_j (N_j + 1)` accepted by [`exhaustive_parse`].
pub const EXHAUSTIVE_LIMIT: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("field stack has {got} channels, topology needs {expected} (J + 2C)")]
    TopologyFieldMismatch { got: usize, expected: usize },
    #[error("candidates given for {got} parts, topology has {expected}")]
    CandidatePartMismatch { got: usize, expected: usize },
    #[error("limb {limb} score matrix is {got:?}, candidates imply {expected:?}")]
    ScoreMatrixMismatch { limb: usize, got: (usize, usize), expected: (usize, usize) },
    #[error("instance too large for exhaustive search: {states:.3e} states")]
    InstanceTooLarge { states: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParseConfig {
    pub min_parts: usize,
    /// Persons scoring below `min_score_per_part × part_count` are dropped.
    pub min_score_per_part: f64,
    pub matcher: Matcher,
    pub association: AssociationConfig,
    /// Whether non-tree limbs take part in matching and the scan.
    pub use_redundant: bool,
}

impl Default for ParseConfig {
    fn default() -> Self {
        Self {
            min_parts: 3,
            min_score_per_part: 0.2,
            matcher: Matcher::Hungarian,
            association: AssociationConfig::default(),
            use_redundant: true,
        }
    }
}

impl ParseConfig {
    /// No pruning: every assembled group is reported.
    pub fn unpruned(self) -> Self {
        Self { min_parts: 1, min_score_per_part: 0.0, ..self }
    }
}

/// Reference to a candidate: `d_part^index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidateRef {
    pub part: usize,
    pub index: usize,
}

/// One assembled person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonParse {
    /// Candidate index per part.
    pub parts: Vec<Option<usize>>,
    pub connections: Vec<LimbConnection>,
    pub score: f64,
    pub part_count: usize,
}

impl PersonParse {
    fn new(
        parts: Vec<Option<usize>>,
        connections: Vec<LimbConnection>,
        candidates: &[Vec<PartCandidate>],
    ) -> Self {
        let part_count = parts.iter().flatten().count();
        let mut person = Self { parts, connections, score: 0.0, part_count };
        person.score = person_score(&person, candidates);
        person
    }

    pub fn candidate_refs(&self) -> impl Iterator<Item = CandidateRef> + '_ {
        self.parts
            .iter()
            .enumerate()
            .filter_map(|(part, m)| m.map(|index| CandidateRef { part, index }))
    }

    pub fn association_score(&self) -> f64 {
        self.connections.iter().map(|c| c.score).sum()
    }
}

/// Σ accepted connection scores + Σ assigned candidate confidences.
pub fn person_score(person: &PersonParse, candidates: &[Vec<PartCandidate>]) -> f64 {
    let parts: f64 = person
        .parts
        .iter()
        .enumerate()
        .filter_map(|(j, m)| m.map(|m| candidates[j][m].score))
        .sum();
    person.association_score() + parts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResult {
    /// Sorted by descending score.
    pub persons: Vec<PersonParse>,
    /// Candidates owned by no reported person, in `(part, index)` order.
    pub unassigned: Vec<CandidateRef>,
}

impl ParseResult {
    /// Σ connection scores over all reported persons.
    pub fn association_score(&self) -> f64 {
        self.persons.iter().map(PersonParse::association_score).sum()
    }

    /// Person partition as sorted candidate sets, sorted.
    pub fn partition(&self) -> Vec<Vec<CandidateRef>> {
        let mut groups: Vec<Vec<CandidateRef>> =
            self.persons.iter().map(|p| p.candidate_refs().collect()).collect();
        groups.sort();
        groups
    }
}

fn active_limbs(classes: &EdgeClassification, config: &ParseConfig, num_limbs: usize) -> Vec<bool> {
    (0..num_limbs)
        .map(|c| classes.is_tree_edge(c) || (config.use_redundant && classes.is_redundant(c)))
        .collect()
}

fn check_candidates(
    candidates: &[Vec<PartCandidate>],
    topology: &SkeletonTopology,
) -> Result<(), ParseError> {
    if candidates.len() != topology.num_parts() {
        return Err(ParseError::CandidatePartMismatch {
            got: candidates.len(),
            expected: topology.num_parts(),
        });
    }
    Ok(())
}

fn check_matrices(
    candidates: &[Vec<PartCandidate>],
    matrices: &[ScoreMatrix],
    topology: &SkeletonTopology,
) -> Result<(), ParseError> {
    check_candidates(candidates, topology)?;
    for (c, limb) in topology.limbs().iter().enumerate() {
        let expected = (candidates[limb.src].len(), candidates[limb.dst].len());
        let got = matrices
            .get(c)
            .map_or((usize::MAX, usize::MAX), |m| (m.rows, m.cols));
        if got != expected {
            return Err(ParseError::ScoreMatrixMismatch { limb: c, got, expected });
        }
    }
    Ok(())
}

/// Score matrices for every limb of the topology.
pub fn limb_score_matrices(
    candidates: &[Vec<PartCandidate>],
    stack: &FieldStack,
    topology: &SkeletonTopology,
    config: &AssociationConfig,
) -> Result<Vec<ScoreMatrix>, ParseError> {
    if stack.channels() != topology.total_channels() || stack.num_parts != topology.num_parts() {
        return Err(ParseError::TopologyFieldMismatch {
            got: stack.channels(),
            expected: topology.total_channels(),
        });
    }
    check_candidates(candidates, topology)?;
    Ok(topology
        .limbs()
        .iter()
        .enumerate()
        .map(|(c, limb)| score_matrix(stack.paf(c), &candidates[limb.src], &candidates[limb.dst], config))
        .collect())
}

/// Full pipeline from candidates and fields to people.
pub fn parse_poses(
    candidates: &[Vec<PartCandidate>],
    stack: &FieldStack,
    topology: &SkeletonTopology,
    classes: &EdgeClassification,
    config: &ParseConfig,
) -> Result<ParseResult, ParseError> {
    let matrices = limb_score_matrices(candidates, stack, topology, &config.association)?;
    assemble(candidates, &matrices, topology, classes, config)
}

/// Per-limb matching followed by the sorted-connection scan.
pub fn assemble(
    candidates: &[Vec<PartCandidate>],
    matrices: &[ScoreMatrix],
    topology: &SkeletonTopology,
    classes: &EdgeClassification,
    config: &ParseConfig,
) -> Result<ParseResult, ParseError> {
    check_matrices(candidates, matrices, topology)?;
    let active = active_limbs(classes, config, topology.num_limbs());
    let acceptance = config.association.acceptance();
    let mut connections = Vec::new();
    for (c, matrix) in matrices.iter().enumerate() {
        if !active[c] {
            continue;
        }
        connections.extend(match_limb(matrix, config.matcher, &acceptance).into_iter().map(
            |(src, dst)| LimbConnection { limb: c, src, dst, score: matrix.score(src, dst) },
        ));
    }
    connections.sort_by(compare_connections);
    Ok(scan(candidates, &connections, topology, config))
}

fn compare_connections(a: &LimbConnection, b: &LimbConnection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.limb.cmp(&b.limb))
        .then(a.src.cmp(&b.src))
        .then(a.dst.cmp(&b.dst))
}

struct Group {
    parts: Vec<Option<usize>>,
    connections: Vec<LimbConnection>,
}

/// Greedy assembly over connections already sorted by descending score.
fn scan(
    candidates: &[Vec<PartCandidate>],
    connections: &[LimbConnection],
    topology: &SkeletonTopology,
    config: &ParseConfig,
) -> ParseResult {
    let j_count = topology.num_parts();
    let mut owner: Vec<Vec<Option<usize>>> =
        candidates.iter().map(|c| vec![None; c.len()]).collect();
    let mut groups: Vec<Option<Group>> = Vec::new();

    for conn in connections {
        let limb = topology.limbs()[conn.limb];
        let (ja, ma) = (limb.src, conn.src);
        let (jb, mb) = (limb.dst, conn.dst);
        match (owner[ja][ma], owner[jb][mb]) {
            (None, None) => {
                let mut parts = vec![None; j_count];
                parts[ja] = Some(ma);
                parts[jb] = Some(mb);
                owner[ja][ma] = Some(groups.len());
                owner[jb][mb] = Some(groups.len());
                groups.push(Some(Group { parts, connections: vec![*conn] }));
            }
            (Some(g), None) | (None, Some(g)) => {
                let (j_new, m_new) = if owner[ja][ma].is_none() { (ja, ma) } else { (jb, mb) };
                let group = groups[g].as_mut().expect("live group");
                if group.parts[j_new].is_some() {
                    continue;
                }
                group.parts[j_new] = Some(m_new);
                group.connections.push(*conn);
                owner[j_new][m_new] = Some(g);
            }
            (Some(g), Some(h)) if g == h => {
                groups[g].as_mut().expect("live group").connections.push(*conn);
            }
            (Some(g), Some(h)) => {
                let (keep, gone) = (g.min(h), g.max(h));
                let conflict = {
                    let a = groups[keep].as_ref().expect("live group");
                    let b = groups[gone].as_ref().expect("live group");
                    a.parts.iter().zip(&b.parts).any(|(x, y)| x.is_some() && y.is_some())
                };
                if conflict {
                    continue;
                }
                let absorbed = groups[gone].take().expect("live group");
                let target = groups[keep].as_mut().expect("live group");
                for (j, m) in absorbed.parts.iter().enumerate() {
                    if let Some(m) = *m {
                        target.parts[j] = Some(m);
                        owner[j][m] = Some(keep);
                    }
                }
                target.connections.extend(absorbed.connections);
                target.connections.push(*conn);
            }
        }
    }

    let persons = groups
        .into_iter()
        .flatten()
        .map(|g| PersonParse::new(g.parts, g.connections, candidates))
        .collect();
    finish(persons, candidates, config)
}

/// Prunes, orders persons and collects unassigned candidates.
fn finish(
    persons: Vec<PersonParse>,
    candidates: &[Vec<PartCandidate>],
    config: &ParseConfig,
) -> ParseResult {
    let mut persons: Vec<PersonParse> = persons
        .into_iter()
        .filter(|p| {
            p.part_count >= config.min_parts.max(1)
                && p.score >= config.min_score_per_part * p.part_count as f64
        })
        .collect();
    persons.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut used: Vec<Vec<bool>> = candidates.iter().map(|c| vec![false; c.len()]).collect();
    for p in &persons {
        for r in p.candidate_refs() {
            used[r.part][r.index] = true;
        }
    }
    let unassigned = used
        .iter()
        .enumerate()
        .flat_map(|(part, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &u)| !u)
                .map(move |(index, _)| CandidateRef { part, index })
        })
        .collect();
    ParseResult { persons, unassigned }
}

/// Size of the joint search space bound, `Π_j (N_j + 1)`.
pub fn exhaustive_states(candidates: &[Vec<PartCandidate>]) -> f64 {
    candidates.iter().map(|c| c.len() as f64 + 1.0).product()
}

/// Exact joint assembly by enumerating every combination of per-limb partial
/// matchings, keeping only combinations in which no person holds two
/// candidates of the same part. Maximizes Σ E over all active limbs;
/// redundant limbs score when consistent but are never required. The first
/// optimum in enumeration order wins ties.
pub fn exhaustive_parse(
    candidates: &[Vec<PartCandidate>],
    matrices: &[ScoreMatrix],
    topology: &SkeletonTopology,
    classes: &EdgeClassification,
    config: &ParseConfig,
) -> Result<ParseResult, ParseError> {
    check_matrices(candidates, matrices, topology)?;
    let states = exhaustive_states(candidates);
    if states > EXHAUSTIVE_LIMIT || topology.num_parts() > 64 {
        return Err(ParseError::InstanceTooLarge { states });
    }
    let active = active_limbs(classes, config, topology.num_limbs());
    let acceptance = config.association.acceptance();

    let mut offsets = Vec::with_capacity(candidates.len());
    let mut total = 0;
    for c in candidates {
        offsets.push(total);
        total += c.len();
    }
    let mut part_of = vec![0usize; total];
    for (j, c) in candidates.iter().enumerate() {
        part_of[offsets[j]..offsets[j] + c.len()].fill(j);
    }

    let limbs: Vec<LimbSearch> = topology
        .limbs()
        .iter()
        .enumerate()
        .filter(|(c, _)| active[*c])
        .map(|(c, limb)| {
            let m = &matrices[c];
            let options = (0..m.rows)
                .map(|r| (0..m.cols).filter(|&n| m.eligible(r, n, &acceptance)).collect())
                .collect();
            LimbSearch {
                limb: c,
                src_offset: offsets[limb.src],
                dst_offset: offsets[limb.dst],
                cols: m.cols,
                options,
                matrix: m,
            }
        })
        .collect();

    let mut search = Search {
        limbs: &limbs,
        sets: DisjointSets::new(&part_of),
        col_used: Vec::new(),
        chosen: Vec::new(),
        score: 0.0,
        best_score: f64::NEG_INFINITY,
        best: Vec::new(),
    };
    search.limb(0);

    // Components of the best connection set become persons.
    let mut sets = DisjointSets::new(&part_of);
    for conn in &search.best {
        let l = &topology.limbs()[conn.limb];
        sets.union(offsets[l.src] + conn.src, offsets[l.dst] + conn.dst);
    }
    let mut root_group: Vec<Option<usize>> = vec![None; total];
    let mut groups: Vec<Group> = Vec::new();
    for conn in &search.best {
        let l = &topology.limbs()[conn.limb];
        let root = sets.find(offsets[l.src] + conn.src);
        let g = *root_group[root].get_or_insert_with(|| {
            groups.push(Group { parts: vec![None; topology.num_parts()], connections: Vec::new() });
            groups.len() - 1
        });
        let group = &mut groups[g];
        group.parts[l.src] = Some(conn.src);
        group.parts[l.dst] = Some(conn.dst);
        group.connections.push(*conn);
    }
    let persons = groups
        .into_iter()
        .map(|g| PersonParse::new(g.parts, g.connections, candidates))
        .collect();
    Ok(finish(persons, candidates, config))
}

struct LimbSearch<'a> {
    limb: usize,
    src_offset: usize,
    dst_offset: usize,
    cols: usize,
    /// Eligible destination columns per source row.
    options: Vec<Vec<usize>>,
    matrix: &'a ScoreMatrix,
}

struct Search<'a> {
    limbs: &'a [LimbSearch<'a>],
    sets: DisjointSets,
    col_used: Vec<bool>,
    chosen: Vec<LimbConnection>,
    score: f64,
    best_score: f64,
    best: Vec<LimbConnection>,
}

impl Search<'_> {
    fn limb(&mut self, li: usize) {
        if li == self.limbs.len() {
            if self.score > self.best_score {
                self.best_score = self.score;
                self.best.clone_from(&self.chosen);
            }
            return;
        }
        let saved = std::mem::replace(&mut self.col_used, vec![false; self.limbs[li].cols]);
        self.row(li, 0);
        self.col_used = saved;
    }

    fn row(&mut self, li: usize, m: usize) {
        let limbs = self.limbs;
        let limb = &limbs[li];
        if m == limb.options.len() {
            self.limb(li + 1);
            return;
        }
        self.row(li, m + 1);
        for &n in &limb.options[m] {
            if self.col_used[n] {
                continue;
            }
            let checkpoint = self.sets.checkpoint();
            if !self.sets.try_join(limb.src_offset + m, limb.dst_offset + n) {
                continue;
            }
            let score = limb.matrix.score(m, n);
            self.col_used[n] = true;
            self.chosen.push(LimbConnection { limb: limb.limb, src: m, dst: n, score });
            let before = self.score;
            self.score += score;
            self.row(li, m + 1);
            self.score = before;
            self.chosen.pop();
            self.col_used[n] = false;
            self.sets.rollback(checkpoint);
        }
    }
}

/// Union-find without path compression so joins can be undone. Each root
/// carries the bitmask of parts in its component.
struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
    parts: Vec<u64>,
    history: Vec<(usize, usize, u8, u64)>,
}

impl DisjointSets {
    fn new(part_of: &[usize]) -> Self {
        Self {
            parent: (0..part_of.len()).collect(),
            rank: vec![0; part_of.len()],
            parts: part_of.iter().map(|&j| 1u64 << (j % 64)).collect(),
            history: Vec::new(),
        }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn checkpoint(&self) -> usize {
        self.history.len()
    }

    /// Joins the components of `a` and `b` unless they already hold a common
    /// part. Returns false on conflict.
    fn try_join(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return true;
        }
        if self.parts[ra] & self.parts[rb] != 0 {
            return false;
        }
        let (hi, lo) = if self.rank[ra] >= self.rank[rb] { (ra, rb) } else { (rb, ra) };
        self.history.push((lo, hi, self.rank[hi], self.parts[hi]));
        self.parent[lo] = hi;
        self.parts[hi] |= self.parts[lo];
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] += 1;
        }
        true
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
            self.parts[rb] |= self.parts[ra];
        }
    }

    fn rollback(&mut self, checkpoint: usize) {
        while self.history.len() > checkpoint {
            let (lo, hi, rank, parts) = self.history.pop().expect("non-empty history");
            self.parent[lo] = lo;
            self.rank[hi] = rank;
            self.parts[hi] = parts;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::topology::RawTopology;

    fn chain(parts: &[&str]) -> SkeletonTopology {
        SkeletonTopology::validate(&RawTopology {
            name: None,
            parts: parts.iter().map(|s| s.to_string()).collect(),
            limbs: parts.windows(2).map(|w| [w[0].to_string(), w[1].to_string()]).collect(),
            root: None,
        })
        .unwrap()
    }

    fn cands(counts: &[usize], score: f64) -> Vec<Vec<PartCandidate>> {
        counts
            .iter()
            .enumerate()
            .map(|(part, &n)| {
                (0..n)
                    .map(|index| PartCandidate {
                        part,
                        index,
                        position: Point::new(index as f64 * 50.0, part as f64 * 50.0),
                        score,
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn person_score_sums_parts_and_connections() {
        let candidates = cands(&[1, 1], 0.9);
        let lone = PersonParse::new(vec![Some(0), None], Vec::new(), &candidates);
        assert!((lone.score - 0.9).abs() < 1e-12);
        let pair = PersonParse::new(
            vec![Some(0), Some(0)],
            vec![LimbConnection { limb: 0, src: 0, dst: 0, score: 0.5 }],
            &candidates,
        );
        assert!((pair.score - 2.3).abs() < 1e-12);
        let twin = PersonParse::new(pair.parts.clone(), pair.connections.clone(), &candidates);
        assert_eq!(twin.score, pair.score);
    }

    #[test]
    fn single_assembly_when_one_candidate_per_part() {
        let topo = chain(&["a", "b", "c"]);
        let classes = topo.classify_edges(0).unwrap();
        let candidates = cands(&[1, 1, 1], 1.0);
        let matrices = vec![ScoreMatrix::from_rows(&[[0.9]]), ScoreMatrix::from_rows(&[[0.8]])];
        let cfg = ParseConfig::default();
        let greedy = assemble(&candidates, &matrices, &topo, &classes, &cfg).unwrap();
        let exact = exhaustive_parse(&candidates, &matrices, &topo, &classes, &cfg).unwrap();
        assert_eq!(greedy.persons.len(), 1);
        assert_eq!(greedy.partition(), exact.partition());
        assert_eq!(greedy.persons[0].parts, [Some(0), Some(0), Some(0)]);
        assert!(greedy.unassigned.is_empty());
    }

    #[test]
    fn gadget_separates_greedy_from_exhaustive() {
        let topo = chain(&["a", "b"]);
        let classes = topo.classify_edges(0).unwrap();
        let candidates = cands(&[2, 2], 1.0);
        let matrices = vec![ScoreMatrix::from_rows(&[[1.0, 0.9], [0.9, 0.1]])];
        let cfg = ParseConfig { matcher: Matcher::Greedy, ..ParseConfig::default() }.unpruned();
        let greedy = assemble(&candidates, &matrices, &topo, &classes, &cfg).unwrap();
        let exact = exhaustive_parse(&candidates, &matrices, &topo, &classes, &cfg).unwrap();
        assert!((greedy.association_score() - 1.1).abs() < 1e-12);
        assert!((exact.association_score() - 1.8).abs() < 1e-12);
        let hungarian = ParseConfig { matcher: Matcher::Hungarian, ..cfg };
        let h = assemble(&candidates, &matrices, &topo, &classes, &hungarian).unwrap();
        assert_eq!(h.partition(), exact.partition());
    }

    #[test]
    fn conflicting_merge_is_ignored() {
        // a-b-c chain plus redundant a-c. Two people; a weak a–c link across
        // them must not merge.
        let topo = SkeletonTopology::validate(&RawTopology {
            name: None,
            parts: vec!["a".into(), "b".into(), "c".into()],
            limbs: vec![
                ["a".into(), "b".into()],
                ["b".into(), "c".into()],
                ["a".into(), "c".into()],
            ],
            root: None,
        })
        .unwrap();
        let classes = topo.classify_edges(0).unwrap();
        assert_eq!(classes.redundant_edges, [2]);
        let candidates = cands(&[2, 2, 2], 1.0);
        let matrices = vec![
            ScoreMatrix::from_rows(&[[0.9, 0.0], [0.0, 0.9]]),
            ScoreMatrix::from_rows(&[[0.8, 0.0], [0.0, 0.0]]),
            ScoreMatrix::from_rows(&[[0.7, 0.0], [0.0, 0.6]]),
        ];
        let cfg = ParseConfig::default().unpruned();
        let r = assemble(&candidates, &matrices, &topo, &classes, &cfg).unwrap();
        assert_eq!(r.persons.len(), 2);
        assert!(r.unassigned.is_empty());
        for p in &r.persons {
            assert_eq!(p.part_count, 3);
        }
    }

    #[test]
    fn non_conflicting_fragments_merge() {
        // Star a-b, a-c: fragments {b}, {c} join through a.
        let topo = SkeletonTopology::validate(&RawTopology {
            name: None,
            parts: vec!["a".into(), "b".into(), "c".into()],
            limbs: vec![["a".into(), "b".into()], ["a".into(), "c".into()]],
            root: None,
        })
        .unwrap();
        let classes = topo.classify_edges(0).unwrap();
        let candidates = cands(&[1, 1, 1], 1.0);
        let matrices = vec![ScoreMatrix::from_rows(&[[0.9]]), ScoreMatrix::from_rows(&[[0.8]])];
        let r = assemble(&candidates, &matrices, &topo, &classes, &ParseConfig::default()).unwrap();
        assert_eq!(r.persons.len(), 1);
        assert_eq!(r.persons[0].connections.len(), 2);
    }

    #[test]
    fn pruning_reports_dropped_candidates() {
        let topo = chain(&["a", "b", "c"]);
        let classes = topo.classify_edges(0).unwrap();
        let candidates = cands(&[1, 1, 1], 1.0);
        let matrices = vec![ScoreMatrix::from_rows(&[[0.9]]), ScoreMatrix::from_rows(&[[0.01]])];
        let r = assemble(&candidates, &matrices, &topo, &classes, &ParseConfig::default()).unwrap();
        assert!(r.persons.is_empty());
        assert_eq!(r.unassigned.len(), 3);
    }

    #[test]
    fn exhaustive_guard() {
        let topo = chain(&["a", "b", "c", "d", "e", "f", "g"]);
        let classes = topo.classify_edges(0).unwrap();
        let candidates = cands(&[9; 7], 1.0);
        let matrices: Vec<_> = (0..6).map(|_| ScoreMatrix::empty(9, 9)).collect();
        assert!(matches!(
            exhaustive_parse(&candidates, &matrices, &topo, &classes, &ParseConfig::default()),
            Err(ParseError::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn shape_errors() {
        let topo = chain(&["a", "b"]);
        let classes = topo.classify_edges(0).unwrap();
        let candidates = cands(&[1, 2], 1.0);
        let bad = vec![ScoreMatrix::empty(1, 1)];
        assert!(matches!(
            assemble(&candidates, &bad, &topo, &classes, &ParseConfig::default()),
            Err(ParseError::ScoreMatrixMismatch { limb: 0, .. })
        ));
        let stack = FieldStack { width: 4, height: 4, num_parts: 2, num_limbs: 0, topology_hash: 0, data: vec![0.0; 32] };
        assert!(matches!(
            parse_poses(&candidates, &stack, &topo, &classes, &ParseConfig::default()),
            Err(ParseError::TopologyFieldMismatch { got: 2, expected: 4 })
        ));
    }
}
