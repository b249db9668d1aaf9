use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use super::{ContractionConfig, CurveSkeleton};
use crate::mesh::{mean_edge_length, Mesh};
use crate::Vec3;

struct Candidate {
    len: f64,
    a: usize,
    b: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // min-heap on (len, a, b)
    fn cmp(&self, other: &Self) -> Ordering {
        other.len.total_cmp(&self.len).then(other.a.cmp(&self.a)).then(other.b.cmp(&self.b))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Simplicial complex under edge collapse. Vertices keep their original
/// index; a collapse merges the higher index into the lower.
struct Complex {
    parent: Vec<usize>,
    sum: Vec<Vec3>,
    count: Vec<usize>,
    nbrs: Vec<BTreeSet<usize>>,
    vfaces: Vec<BTreeSet<usize>>,
    faces: Vec<Option<[usize; 3]>>,
}

impl Complex {
    fn new(mesh: &Mesh, positions: &[Vec3]) -> Self {
        let n = mesh.n_vertices();
        let mut nbrs = vec![BTreeSet::new(); n];
        let mut vfaces = vec![BTreeSet::new(); n];
        let mut faces = Vec::with_capacity(mesh.n_faces());
        for (f, tri) in mesh.faces().iter().enumerate() {
            let t = tri.map(|v| v as usize);
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                nbrs[a].insert(b);
                nbrs[b].insert(a);
                vfaces[t[k]].insert(f);
            }
            faces.push(Some(t));
        }
        Self { parent: (0..n).collect(), sum: positions.to_vec(), count: vec![1; n], nbrs, vfaces, faces }
    }

    fn alive(&self, v: usize) -> bool {
        self.parent[v] == v
    }

    fn position(&self, v: usize) -> Vec3 {
        self.sum[v] / self.count[v] as f64
    }

    fn len(&self, a: usize, b: usize) -> f64 {
        (self.position(a) - self.position(b)).norm()
    }

    fn find(&self, mut v: usize) -> usize {
        while self.parent[v] != v {
            v = self.parent[v];
        }
        v
    }

    fn edge_has_face(&self, a: usize, b: usize) -> bool {
        self.vfaces[a].iter().any(|f| self.vfaces[b].contains(f))
    }

    fn remove_face(&mut self, f: usize) {
        if let Some(t) = self.faces[f].take() {
            for v in t {
                self.vfaces[v].remove(&f);
            }
        }
    }

    /// Merges `b` into `a` (`a < b`).
    fn collapse(&mut self, a: usize, b: usize) {
        for f in std::mem::take(&mut self.vfaces[b]) {
            let Some(mut t) = self.faces[f] else { continue };
            if t.contains(&a) {
                self.remove_face(f);
                continue;
            }
            for v in &mut t {
                if *v == b {
                    *v = a;
                }
            }
            let key: BTreeSet<usize> = t.iter().copied().collect();
            let duplicate = self.vfaces[a].iter().any(|&g| {
                self.faces[g].is_some_and(|u| u.iter().copied().collect::<BTreeSet<_>>() == key)
            });
            self.faces[f] = Some(t);
            if duplicate {
                for v in t {
                    if v != a {
                        self.vfaces[v].remove(&f);
                    }
                }
                self.faces[f] = None;
            } else {
                self.vfaces[a].insert(f);
            }
        }
        for w in std::mem::take(&mut self.nbrs[b]) {
            self.nbrs[w].remove(&b);
            if w != a {
                self.nbrs[w].insert(a);
                self.nbrs[a].insert(w);
            }
        }
        self.nbrs[a].remove(&b);
        self.parent[b] = a;
        self.sum[a] = self.sum[a] + self.sum[b];
        self.count[a] += self.count[b];
    }

    fn push_edges(&self, v: usize, heap: &mut BinaryHeap<Candidate>, need_face: bool) {
        for &w in &self.nbrs[v] {
            if !need_face || self.edge_has_face(v, w) {
                heap.push(Candidate { len: self.len(v, w), a: v.min(w), b: v.max(w) });
            }
        }
    }

    /// Collapses edges shortest first. With `need_face` only edges of
    /// surviving triangles qualify; otherwise edges shorter than `max_len`.
    fn run(&mut self, need_face: bool, max_len: f64) {
        let mut heap = BinaryHeap::new();
        for v in 0..self.parent.len() {
            if self.alive(v) {
                for &w in &self.nbrs[v] {
                    if v < w && (!need_face || self.edge_has_face(v, w)) {
                        heap.push(Candidate { len: self.len(v, w), a: v, b: w });
                    }
                }
            }
        }
        while let Some(Candidate { len, a, b }) = heap.pop() {
            if !self.alive(a) || !self.alive(b) || !self.nbrs[a].contains(&b) {
                continue;
            }
            if len != self.len(a, b) || (need_face && !self.edge_has_face(a, b)) {
                continue;
            }
            if !need_face && len >= max_len {
                break;
            }
            self.collapse(a, b);
            self.push_edges(a, &mut heap, need_face);
        }
    }
}

/// Greedy shortest-edge collapse of the contracted surface until no
/// triangle is left, then merging of skeleton edges shorter than
/// `cfg.collapse_edge_length`. Node positions are centroids of the merged
/// contracted vertices.
pub fn collapse_to_graph(mesh: &Mesh, contracted: &[Vec3], cfg: &ContractionConfig) -> CurveSkeleton {
    let mut cx = Complex::new(mesh, contracted);
    cx.run(true, f64::INFINITY);
    let min_len = cfg.collapse_edge_length.unwrap_or_else(|| 2.0 * mean_edge_length(mesh));
    cx.run(false, min_len);

    let reps: Vec<usize> = (0..cx.parent.len()).filter(|&v| cx.alive(v)).collect();
    let mut index = vec![usize::MAX; cx.parent.len()];
    for (i, &r) in reps.iter().enumerate() {
        index[r] = i;
    }
    let nodes = reps.iter().map(|&r| cx.position(r)).collect();
    let mut edges = Vec::new();
    for &r in &reps {
        edges.extend(cx.nbrs[r].iter().filter(|&&w| r < w).map(|&w| (index[r], index[w])));
    }
    edges.sort_unstable();
    let vertex_map = (0..cx.parent.len()).map(|v| index[cx.find(v)]).collect();
    CurveSkeleton { nodes, edges, vertex_map }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tetrahedron_collapses_completely() {
        let m = crate::mesh::tests::tetrahedron();
        let sk = collapse_to_graph(&m, m.positions(), &ContractionConfig::default());
        assert!(sk.nodes.len() <= 2);
        assert_eq!(sk.vertex_map.len(), 4);
        assert!(sk.is_tree());
    }
}
