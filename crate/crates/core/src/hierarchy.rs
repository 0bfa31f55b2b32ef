//! Level meshes `T_0 ≺ T_1 ≺ … ≺ T_L` of an NVB forest.
//!
//! `T_j` consists of the ancestors of the leaves at generation
//! `min(gen(leaf), j)`: every node of generation exactly `j` together with
//! every leaf of generation below `j`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::mesh::{MeshForest, NodeId, VertexId};

#[derive(Clone, Debug)]
pub struct LevelMesh {
    pub level: usize,
    /// Forest nodes forming the partition `T_j`, ascending.
    pub elements: Vec<NodeId>,
    /// Vertex -> incident elements of `T_j`.
    patches: BTreeMap<VertexId, Vec<NodeId>>,
    /// `N_j^0`, ascending.
    pub interior: Vec<VertexId>,
}

impl LevelMesh {
    fn new(forest: &MeshForest, level: usize, elements: Vec<NodeId>) -> Self {
        let mut patches: BTreeMap<VertexId, Vec<NodeId>> = BTreeMap::new();
        for &n in &elements {
            for &v in &forest.node(n).vertices {
                patches.entry(v).or_default().push(n);
            }
        }
        let interior = patches
            .keys()
            .copied()
            .filter(|&v| !forest.vertex(v).on_gamma)
            .collect();
        LevelMesh {
            level,
            elements,
            patches,
            interior,
        }
    }

    /// `N_j`, ascending.
    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.patches.keys().copied()
    }

    pub fn num_vertices(&self) -> usize {
        self.patches.len()
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.patches.contains_key(&v)
    }

    pub fn patch(&self, v: VertexId) -> &[NodeId] {
        self.patches.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn valence(&self, v: VertexId) -> usize {
        self.patch(v).len()
    }

    pub fn patch_area(&self, forest: &MeshForest, v: VertexId) -> f64 {
        self.patch(v).iter().map(|&n| forest.node(n).area).sum()
    }

    /// Position of `v` in `N_j^0`.
    pub fn interior_index(&self, v: VertexId) -> Option<usize> {
        self.interior.binary_search(&v).ok()
    }
}

#[derive(Clone, Debug)]
pub struct LevelHierarchy {
    pub levels: Vec<LevelMesh>,
    /// `N_j^0 \ M_j^0` per level, ascending.
    pub active: Vec<Vec<VertexId>>,
}

impl LevelHierarchy {
    pub fn extract(forest: &MeshForest) -> Self {
        let max_level = forest.max_leaf_generation() as usize;
        let mut by_gen: Vec<Vec<NodeId>> = vec![Vec::new(); max_level + 1];
        for (id, node) in forest.nodes().iter().enumerate() {
            let g = node.gen as usize;
            if g <= max_level {
                by_gen[g].push(id);
            }
        }
        let mut levels = Vec::with_capacity(max_level + 1);
        // leaves of generation < j persist into level j
        let mut persistent: Vec<NodeId> = Vec::new();
        for (j, gen_nodes) in by_gen.iter().enumerate() {
            let mut elements: Vec<NodeId> = persistent.iter().copied().chain(gen_nodes.iter().copied()).collect();
            elements.sort_unstable();
            levels.push(LevelMesh::new(forest, j, elements));
            persistent.extend(gen_nodes.iter().copied().filter(|&n| forest.node(n).is_leaf()));
        }
        let mut h = LevelHierarchy {
            levels,
            active: Vec::new(),
        };
        h.active = (0..=max_level).map(|j| h.compute_active(forest, j)).collect();
        h
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, j: usize) -> &LevelMesh {
        &self.levels[j]
    }

    pub fn leaf_level(&self) -> &LevelMesh {
        &self.levels[self.max_level()]
    }

    /// Element of `T_{j-1}` containing the element `n` of `T_j`.
    pub fn parent_in_level(&self, forest: &MeshForest, j: usize, n: NodeId) -> NodeId {
        let node = forest.node(n);
        if node.gen as usize == j && j > 0 {
            node.parent.expect("generation > 0 has a parent")
        } else {
            n
        }
    }

    /// Interior vertices whose patch changes between `T_{j-1}` and `T_j`:
    /// the midpoints inserted at level `j` and the endpoints of the edges they
    /// bisect. For `j = 0` this is all of `N_0^0`.
    pub fn compute_active(&self, forest: &MeshForest, j: usize) -> Vec<VertexId> {
        let level = &self.levels[j];
        if j == 0 {
            return level.interior.clone();
        }
        let mut out = Vec::new();
        for &n in &level.elements {
            let node = forest.node(n);
            if node.gen as usize != j {
                continue;
            }
            let parent = forest.node(node.parent.expect("generation > 0 has a parent"));
            let [a, b, _] = parent.vertices;
            let m = node.vertices[2];
            for v in [a, b, m] {
                if !forest.vertex(v).on_gamma {
                    out.push(v);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `N_j^0 \ N_{j-1}^0`.
    pub fn new_interior(&self, j: usize) -> Vec<VertexId> {
        let cur = &self.levels[j].interior;
        if j == 0 {
            return cur.clone();
        }
        let prev = &self.levels[j - 1];
        cur.iter()
            .copied()
            .filter(|&v| prev.interior_index(v).is_none())
            .collect()
    }

    /// `level,elements,n0,active` per level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,elements,n0,active\n");
        for (j, l) in self.levels.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                j,
                l.elements.len(),
                l.interior.len(),
                self.active[j].len()
            );
        }
        out
    }
}
