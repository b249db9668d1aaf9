//! From segmentation and curve skeleton to a rigged model.
//!
//! Motion joints sit on the skeleton next to the centroid of each boundary
//! between two segments. Auxiliary joints mark skeleton endpoints and
//! branch points, and consecutive joints along a skeleton arc become bones.
//! Bones that merely extend a segment to its tip are pruned, bones that
//! leave the surface are split at the skeleton midpoint, and finally every
//! vertex gets bone-heat skinning weights.

mod io;
mod weights;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use io::{parse_rig, write_rig, RigFile};
pub use weights::{bone_heat_weights, VertexWeights};

use crate::linalg::LinalgError;
use crate::mesh::{voronoi_areas, Mesh, MeshError};
use crate::segment::Segmentation;
use crate::skeleton::{
    classify_nodes, closest_skeleton_point, node_labels, polyline_midpoint, CurveSkeleton, SkeletonPoint, SkeletonRef,
};
use crate::spatial::InsideTest;
use crate::{Exec, Vec3};

/// Collision refinement gives up after this many rounds.
pub const MAX_REFINEMENT_ROUNDS: usize = 8;
/// Interior samples per bone for the containment test.
pub const BONE_SAMPLES: usize = 20;

#[derive(Debug, Error)]
pub enum RigError {
    #[error("skeleton contains a cycle")]
    CyclicSkeleton,
    #[error("skeleton has no edges")]
    DegenerateSkeleton,
    #[error("bones still collide with the mesh after {0} refinement rounds")]
    RefinementDiverged(usize),
    #[error("weight solve failed: {0}")]
    SolveFailed(#[from] LinalgError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JointKind {
    /// Ball joint with three rotational degrees of freedom.
    Motion,
    /// Fixed joint at a skeleton endpoint or branch point.
    Auxiliary,
    /// Fixed joint inserted to keep a bone inside the mesh.
    Virtual,
}

impl JointKind {
    pub fn dof(self) -> usize {
        match self {
            JointKind::Motion => 3,
            _ => 0,
        }
    }
}

impl fmt::Display for JointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JointKind::Motion => "motion",
            JointKind::Auxiliary => "auxiliary",
            JointKind::Virtual => "virtual",
        })
    }
}

impl FromStr for JointKind {
    type Err = RigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "motion" => Ok(JointKind::Motion),
            "auxiliary" => Ok(JointKind::Auxiliary),
            "virtual" => Ok(JointKind::Virtual),
            _ => Err(RigError::Parse(format!("unknown joint kind {s:?}"))),
        }
    }
}

/// A joint of the final hierarchy. Parents always precede their children.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint {
    pub position: Vec3,
    pub parent: Option<usize>,
    pub kind: JointKind,
}

/// A joint still tied to the skeleton it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedJoint {
    pub joint: Joint,
    pub anchor: SkeletonPoint,
    /// Segment label the joint is attributed to (its skeleton node's label).
    pub label: usize,
}

/// Rigged model: mesh, joint tree and per-vertex weights. Bone `j` is the
/// segment from joint `j` to its parent, so the root carries no bone.
#[derive(Debug, Clone)]
pub struct Rig {
    pub mesh: Mesh,
    pub joints: Vec<Joint>,
    pub weights: Vec<VertexWeights>,
}

impl Rig {
    /// Joint indices that own a bone.
    pub fn bones(&self) -> Vec<usize> {
        bones_of(&self.joints)
    }

    pub fn bone_segment(&self, b: usize) -> (Vec3, Vec3) {
        let p = self.joints[b].parent.expect("bone joint has a parent");
        (self.joints[p].position, self.joints[b].position)
    }

    pub fn motion_joints(&self) -> Vec<usize> {
        (0..self.joints.len()).filter(|&j| self.joints[j].kind == JointKind::Motion).collect()
    }
}

pub fn bones_of(joints: &[Joint]) -> Vec<usize> {
    (0..joints.len()).filter(|&j| joints[j].parent.is_some()).collect()
}

/// True when `joints` form one tree with parents listed before children.
pub fn is_tree(joints: &[Joint]) -> bool {
    let roots = joints.iter().filter(|j| j.parent.is_none()).count();
    roots == 1 && joints.iter().enumerate().all(|(i, j)| j.parent.is_none_or(|p| p < i))
}

/// Vertices on either side of every edge whose endpoints carry different
/// labels, grouped by the label pair `(a, b)` with `a < b`.
pub fn segment_boundaries(mesh: &Mesh, labels: &[usize]) -> BTreeMap<(usize, usize), BTreeSet<usize>> {
    let mut out: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for (a, b) in mesh.topology().edges() {
        let (a, b) = (a as usize, b as usize);
        let (la, lb) = (labels[a], labels[b]);
        if la != lb {
            let set = out.entry((la.min(lb), la.max(lb))).or_default();
            set.insert(a);
            set.insert(b);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionJoint {
    pub labels: (usize, usize),
    pub position: Vec3,
    pub anchor: SkeletonPoint,
}

/// One motion joint per boundary, at the skeleton point closest to the
/// boundary centroid.
pub fn localize_joints(
    mesh: &Mesh,
    boundaries: &BTreeMap<(usize, usize), BTreeSet<usize>>,
    sk: &CurveSkeleton,
) -> Vec<MotionJoint> {
    boundaries
        .iter()
        .filter(|(_, set)| !set.is_empty())
        .map(|(&labels, set)| {
            let centroid = set.iter().map(|&v| mesh.positions()[v]).sum::<Vec3>() / set.len() as f64;
            let anchor = closest_skeleton_point(sk, &centroid);
            MotionJoint { labels, position: anchor.point, anchor }
        })
        .collect()
}

/// Joints with undirected bones, before a root is chosen.
#[derive(Debug, Clone)]
struct JointGraph {
    joints: Vec<PlacedJoint>,
    adj: Vec<BTreeSet<usize>>,
}

impl JointGraph {
    fn new(joints: Vec<PlacedJoint>) -> Self {
        let n = joints.len();
        Self { joints, adj: vec![BTreeSet::new(); n] }
    }

    fn from_tree(joints: &[PlacedJoint]) -> Self {
        let mut g = Self::new(joints.to_vec());
        for (i, j) in joints.iter().enumerate() {
            if let Some(p) = j.joint.parent {
                g.link(i, p);
            }
        }
        g
    }

    fn link(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    /// Drops joint `j` and its bones, renumbering the rest.
    fn remove(&mut self, j: usize) {
        self.joints.remove(j);
        self.adj.remove(j);
        for set in &mut self.adj {
            *set = set.iter().filter(|&&k| k != j).map(|&k| if k > j { k - 1 } else { k }).collect();
        }
    }

    /// Root: among auxiliary joints attributed to the segment with the
    /// largest area, the one with most bones (lowest index on ties).
    fn root(&self, part_areas: &[f64]) -> usize {
        let mut best_label = 0;
        for (l, &a) in part_areas.iter().enumerate() {
            if a > part_areas[best_label] {
                best_label = l;
            }
        }
        let pick = |pred: &dyn Fn(&PlacedJoint) -> bool| {
            (0..self.joints.len())
                .filter(|&j| pred(&self.joints[j]))
                .max_by(|&a, &b| self.adj[a].len().cmp(&self.adj[b].len()).then(b.cmp(&a)))
        };
        pick(&|j| j.joint.kind == JointKind::Auxiliary && j.label == best_label)
            .or_else(|| pick(&|j| j.joint.kind != JointKind::Motion))
            .unwrap_or(0)
    }

    /// Breadth-first ordering from the root; parents precede children.
    fn into_tree(self, part_areas: &[f64]) -> Vec<PlacedJoint> {
        if self.joints.is_empty() {
            return Vec::new();
        }
        let root = self.root(part_areas);
        let mut order = Vec::with_capacity(self.joints.len());
        let mut parent = vec![None; self.joints.len()];
        let mut seen = vec![false; self.joints.len()];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(v);
                    queue.push_back(w);
                }
            }
        }
        let mut index = vec![usize::MAX; self.joints.len()];
        for (i, &v) in order.iter().enumerate() {
            index[v] = i;
        }
        order
            .iter()
            .map(|&v| {
                let mut j = self.joints[v];
                j.joint.parent = parent[v].map(|p| index[p]);
                j
            })
            .collect()
    }
}

/// Total vertex area per segment label.
pub fn part_areas(mesh: &Mesh, seg: &Segmentation) -> Vec<f64> {
    let mut areas = vec![0.0; seg.k];
    for (a, &l) in voronoi_areas(mesh).iter().zip(&seg.labels) {
        areas[l] += a;
    }
    areas
}

/// Builds the joint hierarchy: auxiliary joints at skeleton endpoints and
/// branch points, motion joints in between, bones between consecutive
/// joints along each skeleton arc.
pub fn build_topology(
    sk: &CurveSkeleton,
    motion: &[MotionJoint],
    node_labels: &[usize],
    part_areas: &[f64],
) -> Result<Vec<PlacedJoint>, RigError> {
    if sk.edges.is_empty() {
        return Err(RigError::DegenerateSkeleton);
    }
    if !sk.is_tree() {
        return Err(RigError::CyclicSkeleton);
    }
    let (endpoints, junctions) = classify_nodes(sk);
    let key: BTreeSet<usize> = endpoints.iter().chain(&junctions).copied().collect();
    let mut graph = JointGraph::new(Vec::new());
    let mut key_joint = BTreeMap::new();
    for &n in &key {
        key_joint.insert(n, graph.joints.len());
        graph.joints.push(PlacedJoint {
            joint: Joint { position: sk.nodes[n], parent: None, kind: JointKind::Auxiliary },
            anchor: sk.node_point(n),
            label: node_labels[n],
        });
    }
    graph.adj = vec![BTreeSet::new(); graph.joints.len()];

    let mut on_edge: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
    for m in motion {
        let idx = graph.joints.len();
        let label = node_labels[sk.nearest_node(&m.anchor)];
        graph.joints.push(PlacedJoint {
            joint: Joint { position: m.position, parent: None, kind: JointKind::Motion },
            anchor: m.anchor,
            label,
        });
        graph.adj.push(BTreeSet::new());
        match m.anchor.at {
            SkeletonRef::Edge { edge, t } => on_edge.entry(edge).or_default().push((t, idx)),
            SkeletonRef::Node(_) => unreachable!("skeleton with edges yields edge anchors"),
        }
    }

    let adj = sk.adjacency();
    let edge_index: BTreeMap<(usize, usize), usize> = sk.edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut walked = BTreeSet::new();
    for &start in &key {
        for &first in &adj[start] {
            if walked.contains(&(start.min(first), start.max(first))) {
                continue;
            }
            // walk one arc, collecting joints in order
            let mut chain = vec![key_joint[&start]];
            let (mut prev, mut cur) = (start, first);
            loop {
                let e = (prev.min(cur), prev.max(cur));
                walked.insert(e);
                if let Some(list) = on_edge.get(&edge_index[&e]) {
                    let forward = prev < cur;
                    let mut list = list.clone();
                    list.sort_by(|a, b| if forward { a.0.total_cmp(&b.0) } else { b.0.total_cmp(&a.0) });
                    chain.extend(list.iter().map(|&(_, j)| j));
                }
                if key.contains(&cur) {
                    break;
                }
                let next = *adj[cur].iter().find(|&&w| w != prev).expect("degree-2 node has a second neighbor");
                (prev, cur) = (cur, next);
            }
            chain.push(key_joint[&cur]);
            for w in chain.windows(2) {
                graph.link(w[0], w[1]);
            }
        }
    }
    Ok(graph.into_tree(part_areas))
}

/// Removes auxiliary endpoints whose only bone leads to another auxiliary
/// joint of the same segment, until nothing changes. At least one bone is
/// always kept.
pub fn prune_redundant(joints: &[PlacedJoint], part_areas: &[f64]) -> Vec<PlacedJoint> {
    let mut g = JointGraph::from_tree(joints);
    loop {
        if g.joints.len() <= 2 {
            break;
        }
        let victim = (0..g.joints.len()).find(|&j| {
            let pj = &g.joints[j];
            pj.joint.kind == JointKind::Auxiliary && g.adj[j].len() == 1 && {
                let other = &g.joints[*g.adj[j].first().unwrap()];
                other.joint.kind == JointKind::Auxiliary && other.label == pj.label
            }
        });
        match victim {
            Some(j) => g.remove(j),
            None => break,
        }
    }
    g.into_tree(part_areas)
}

/// True when the bone `a–b` crosses the surface or leaves the solid.
pub fn bone_collides(inside: &InsideTest, a: &Vec3, b: &Vec3) -> bool {
    inside.bvh().segment_hit(a, b).is_some() || !inside.segment_inside(a, b, BONE_SAMPLES)
}

/// Splits colliding bones at the skeleton midpoint between their joints
/// with a virtual joint, round after round. Returns the joints and the
/// number of rounds that inserted joints.
pub fn refine_collisions(
    joints: &[PlacedJoint],
    inside: &InsideTest,
    sk: &CurveSkeleton,
    node_labels: &[usize],
) -> Result<(Vec<PlacedJoint>, usize), RigError> {
    let mut joints = joints.to_vec();
    for round in 0..=MAX_REFINEMENT_ROUNDS {
        let colliding: Vec<usize> = (0..joints.len())
            .filter(|&c| {
                joints[c].joint.parent.is_some_and(|p| {
                    bone_collides(inside, &joints[p].joint.position, &joints[c].joint.position)
                })
            })
            .collect();
        if colliding.is_empty() {
            return Ok((joints, round));
        }
        if round == MAX_REFINEMENT_ROUNDS {
            break;
        }
        for c in colliding {
            let p = joints[c].joint.parent.unwrap();
            let line = sk.path_between(&joints[p].anchor, &joints[c].anchor);
            let anchor = closest_skeleton_point(sk, &polyline_midpoint(&line));
            let mid = polyline_midpoint(&line);
            let v = joints.len();
            joints.push(PlacedJoint {
                joint: Joint { position: mid, parent: Some(p), kind: JointKind::Virtual },
                anchor,
                label: node_labels[sk.nearest_node(&anchor)],
            });
            joints[c].joint.parent = Some(v);
        }
        joints = reorder(&joints);
    }
    Err(RigError::RefinementDiverged(MAX_REFINEMENT_ROUNDS))
}

/// Topological re-indexing keeping the current root and parent relations.
fn reorder(joints: &[PlacedJoint]) -> Vec<PlacedJoint> {
    let mut children = vec![Vec::new(); joints.len()];
    let mut root = 0;
    for (i, j) in joints.iter().enumerate() {
        match j.joint.parent {
            Some(p) => children[p].push(i),
            None => root = i,
        }
    }
    let mut order = Vec::with_capacity(joints.len());
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        queue.extend(children[v].iter().copied());
    }
    let mut index = vec![usize::MAX; joints.len()];
    for (i, &v) in order.iter().enumerate() {
        index[v] = i;
    }
    order
        .iter()
        .map(|&v| {
            let mut j = joints[v];
            j.joint.parent = j.joint.parent.map(|p| index[p]);
            j
        })
        .collect()
}

/// Everything [`infer_rig`] produces besides the rig itself.
#[derive(Debug, Clone)]
pub struct RigReport {
    pub rig: Rig,
    pub placed: Vec<PlacedJoint>,
    pub refinement_rounds: usize,
}

/// Runs joint localization, topology, pruning, collision refinement and
/// weighting.
pub fn infer_rig(mesh: &Mesh, seg: &Segmentation, sk: &CurveSkeleton, exec: Exec) -> Result<RigReport, RigError> {
    if seg.labels.len() != mesh.n_vertices() || sk.vertex_map.len() != mesh.n_vertices() {
        return Err(RigError::Invalid(format!(
            "mesh has {} vertices, segmentation {} labels, skeleton map {} entries",
            mesh.n_vertices(),
            seg.labels.len(),
            sk.vertex_map.len()
        )));
    }
    let inside = InsideTest::new(mesh)?;
    let labels = node_labels(sk, &seg.labels);
    let areas = part_areas(mesh, seg);
    let boundaries = segment_boundaries(mesh, &seg.labels);
    let motion = localize_joints(mesh, &boundaries, sk);
    let joints = build_topology(sk, &motion, &labels, &areas)?;
    let joints = prune_redundant(&joints, &areas);
    let (placed, rounds) = refine_collisions(&joints, &inside, sk, &labels)?;
    let plain: Vec<Joint> = placed.iter().map(|p| p.joint).collect();
    let weights = bone_heat_weights(mesh, &plain, &inside, exec)?;
    Ok(RigReport { rig: Rig { mesh: mesh.clone(), joints: plain, weights }, placed, refinement_rounds: rounds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_kind_strings() {
        for k in [JointKind::Motion, JointKind::Auxiliary, JointKind::Virtual] {
            assert_eq!(k.to_string().parse::<JointKind>().unwrap(), k);
        }
        assert_eq!(JointKind::Motion.dof(), 3);
        assert_eq!(JointKind::Virtual.dof(), 0);
    }

    fn path_skeleton(n: usize, len: f64) -> CurveSkeleton {
        CurveSkeleton {
            nodes: (0..n).map(|i| Vec3::new(len * i as f64 / (n - 1) as f64, 0.0, 0.0)).collect(),
            edges: (0..n - 1).map(|i| (i, i + 1)).collect(),
            vertex_map: Vec::new(),
        }
    }

    #[test]
    fn path_with_one_motion_joint() {
        let sk = path_skeleton(5, 4.0);
        let anchor = closest_skeleton_point(&sk, &Vec3::new(1.5, 1.0, 0.0));
        let m = MotionJoint { labels: (0, 1), position: anchor.point, anchor };
        let labels = [0, 0, 1, 1, 1];
        let joints = build_topology(&sk, &[m], &labels, &[1.0, 2.0]).unwrap();
        assert_eq!(joints.len(), 3);
        let plain: Vec<Joint> = joints.iter().map(|j| j.joint).collect();
        assert!(is_tree(&plain));
        // root is the auxiliary endpoint of the larger segment 1
        assert_eq!(plain[0].kind, JointKind::Auxiliary);
        assert_eq!(plain[0].position, Vec3::new(4.0, 0.0, 0.0));
        assert_eq!(plain[1].kind, JointKind::Motion);
        assert_eq!(plain[2].parent, Some(1));
    }

    #[test]
    fn rigid_path_keeps_one_bone() {
        let sk = path_skeleton(4, 3.0);
        let joints = build_topology(&sk, &[], &[0; 4], &[1.0]).unwrap();
        assert_eq!(joints.len(), 2);
        let pruned = prune_redundant(&joints, &[1.0]);
        assert_eq!(pruned.len(), 2);
    }

    #[test]
    fn cycle_is_rejected() {
        let mut sk = path_skeleton(4, 3.0);
        sk.edges.push((0, 3));
        assert!(matches!(build_topology(&sk, &[], &[0; 4], &[1.0]), Err(RigError::CyclicSkeleton)));
    }
}
