//! Conforming triangle meshes refined by newest vertex bisection.
//!
//! Every triangle stores its vertices in the local order `(v0, v1, v2)`: the
//! refinement edge is `(v0, v1)` and `v2` is the newest vertex. Bisecting
//! `(v0, v1, v2)` with midpoint `m` produces the children `(v2, v0, m)` and
//! `(v1, v2, m)`, so `m` is the newest vertex of both and the two remaining
//! parent edges become the children's refinement edges.
//!
//! The full binary forest is kept: roots are the triangles of the initial
//! mesh, leaves form the current mesh.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{self, Point};

pub type VertexId = usize;
pub type NodeId = usize;

/// Unordered vertex pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey(pub VertexId, pub VertexId);

impl EdgeKey {
    pub fn new(a: VertexId, b: VertexId) -> Self {
        if a < b {
            EdgeKey(a, b)
        } else {
            EdgeKey(b, a)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Vertex {
    pub coords: Point,
    pub gen: u32,
    pub on_gamma: bool,
    /// Endpoints of the edge this vertex was inserted on, `None` for initial vertices.
    pub parent_edge: Option<[VertexId; 2]>,
}

#[derive(Clone, Debug)]
pub struct TriNode {
    pub vertices: [VertexId; 3],
    pub gen: u32,
    pub parent: Option<NodeId>,
    pub children: Option<[NodeId; 2]>,
    pub chart: usize,
    pub root: NodeId,
    /// `|root| * 2^-gen`, exact for flat panels.
    pub area: f64,
}

impl TriNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn refinement_edge(&self) -> EdgeKey {
        EdgeKey::new(self.vertices[0], self.vertices[1])
    }

    pub fn edges(&self) -> [EdgeKey; 3] {
        let [a, b, c] = self.vertices;
        [EdgeKey::new(a, b), EdgeKey::new(b, c), EdgeKey::new(c, a)]
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.vertices.contains(&v)
    }
}

/// Raw description of an initial mesh, as read from the ASCII format.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeshDescription {
    pub coords: Vec<Point>,
    /// `(v0, v1, v2)` with refinement edge `(v0, v1)`, plus a chart id.
    pub triangles: Vec<([VertexId; 3], usize)>,
    pub gamma_edges: Vec<[VertexId; 2]>,
}

#[derive(Clone, Debug)]
pub struct MeshForest {
    vertices: Vec<Vertex>,
    nodes: Vec<TriNode>,
    roots: Vec<NodeId>,
    gamma_edges: HashSet<EdgeKey>,
    midpoints: HashMap<EdgeKey, VertexId>,
    /// Current leaves incident to each edge of the leaf mesh.
    edge_leaves: HashMap<EdgeKey, Vec<NodeId>>,
    n_leaves: usize,
}

impl MeshForest {
    /// Builds a forest whose roots are `triangles`, checking conformity and the
    /// matching condition.
    pub fn build_initial(
        coords: &[Point],
        triangles: &[([VertexId; 3], usize)],
        gamma_edges: &[[VertexId; 2]],
    ) -> Result<Self> {
        let forest = Self::build_unchecked(coords, triangles, gamma_edges)?;
        forest.check_conformity()?;
        if let Some(edge) = forest.first_matching_violation() {
            return Err(Error::MatchingViolation(edge.0, edge.1));
        }
        Ok(forest)
    }

    /// Like [`MeshForest::build_initial`] but without the matching check. Leaf
    /// meshes of refined forests generally do not satisfy it.
    pub fn build_unchecked(
        coords: &[Point],
        triangles: &[([VertexId; 3], usize)],
        gamma_edges: &[[VertexId; 2]],
    ) -> Result<Self> {
        let mut nodes = Vec::with_capacity(triangles.len());
        let mut edge_leaves: HashMap<EdgeKey, Vec<NodeId>> = HashMap::new();
        for (id, &(tri, chart)) in triangles.iter().enumerate() {
            let [a, b, c] = tri;
            if a == b || b == c || a == c || tri.iter().any(|&v| v >= coords.len()) {
                return Err(Error::DegenerateTriangle(id));
            }
            let area = geometry::triangle_area(&coords[a], &coords[b], &coords[c]);
            let scale = geometry::diameter(&coords[a], &coords[b], &coords[c]);
            if area.is_nan() || area <= 1e-14 * scale * scale {
                return Err(Error::DegenerateTriangle(id));
            }
            let node = TriNode {
                vertices: tri,
                gen: 0,
                parent: None,
                children: None,
                chart,
                root: id,
                area,
            };
            for e in node.edges() {
                edge_leaves.entry(e).or_default().push(id);
            }
            nodes.push(node);
        }

        let mut gamma = HashSet::new();
        for &[a, b] in gamma_edges {
            let key = EdgeKey::new(a, b);
            if !edge_leaves.contains_key(&key) {
                return Err(Error::UnknownGammaEdge(a, b));
            }
            gamma.insert(key);
        }
        let vertices = coords
            .iter()
            .enumerate()
            .map(|(i, &p)| Vertex {
                coords: p,
                gen: 0,
                on_gamma: gamma.iter().any(|e| e.0 == i || e.1 == i),
                parent_edge: None,
            })
            .collect();

        let n = nodes.len();
        Ok(MeshForest {
            vertices,
            nodes,
            roots: (0..n).collect(),
            gamma_edges: gamma,
            midpoints: HashMap::new(),
            edge_leaves,
            n_leaves: n,
        })
    }

    pub fn from_description(desc: &MeshDescription) -> Result<Self> {
        Self::build_initial(&desc.coords, &desc.triangles, &desc.gamma_edges)
    }

    fn check_conformity(&self) -> Result<()> {
        for (edge, inc) in &self.edge_leaves {
            if inc.len() > 2 {
                return Err(Error::NonConforming(format!(
                    "edge ({}, {}) shared by {} triangles",
                    edge.0,
                    edge.1,
                    inc.len()
                )));
            }
        }
        // A hanging vertex sits inside an edge that only one triangle sees.
        for (edge, inc) in &self.edge_leaves {
            if inc.len() != 1 {
                continue;
            }
            let p = self.vertices[edge.0].coords;
            let q = self.vertices[edge.1].coords;
            let len = geometry::norm(&geometry::sub(&q, &p));
            for (i, v) in self.vertices.iter().enumerate() {
                if i == edge.0 || i == edge.1 {
                    continue;
                }
                let dp = geometry::norm(&geometry::sub(&v.coords, &p));
                let dq = geometry::norm(&geometry::sub(&v.coords, &q));
                if dp + dq - len < 1e-12 * len {
                    return Err(Error::NonConforming(format!(
                        "vertex {i} hangs on edge ({}, {})",
                        edge.0, edge.1
                    )));
                }
            }
        }
        Ok(())
    }

    /// True iff every interior edge is the refinement edge of both or of
    /// neither of its two triangles.
    pub fn check_matching(&self) -> bool {
        self.first_matching_violation().is_none()
    }

    fn first_matching_violation(&self) -> Option<EdgeKey> {
        let mut edges: Vec<_> = self.edge_leaves.iter().collect();
        edges.sort_by_key(|(e, _)| **e);
        for (edge, inc) in edges {
            if let [s, t] = inc[..] {
                let rs = self.nodes[s].refinement_edge() == *edge;
                let rt = self.nodes[t].refinement_edge() == *edge;
                if rs != rt {
                    return Some(*edge);
                }
            }
        }
        None
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v]
    }

    pub fn nodes(&self) -> &[TriNode] {
        &self.nodes
    }

    pub fn node(&self, n: NodeId) -> &TriNode {
        &self.nodes[n]
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn num_leaves(&self) -> usize {
        self.n_leaves
    }

    /// Current leaves in ascending node order. This order defines the
    /// piecewise-constant degrees of freedom.
    pub fn leaves(&self) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&n| self.nodes[n].is_leaf()).collect()
    }

    pub fn max_leaf_generation(&self) -> u32 {
        self.nodes
            .iter()
            .filter(|n| n.is_leaf())
            .map(|n| n.gen)
            .max()
            .unwrap_or(0)
    }

    pub fn is_gamma_edge(&self, a: VertexId, b: VertexId) -> bool {
        self.gamma_edges.contains(&EdgeKey::new(a, b))
    }

    pub fn gamma_edges(&self) -> impl Iterator<Item = EdgeKey> + '_ {
        self.gamma_edges.iter().copied()
    }

    /// Minimum generation over all forest nodes containing `v`.
    pub fn vertex_generation(&self, v: VertexId) -> u32 {
        self.vertices[v].gen
    }

    pub fn corner_points(&self, n: NodeId) -> [Point; 3] {
        self.nodes[n].vertices.map(|v| self.vertices[v].coords)
    }

    /// Area from the vertex coordinates (as opposed to the exact `TriNode::area`).
    pub fn geometric_area(&self, n: NodeId) -> f64 {
        let [a, b, c] = self.corner_points(n);
        geometry::triangle_area(&a, &b, &c)
    }

    /// Leaves incident to an edge of the current leaf mesh.
    pub fn leaves_on_edge(&self, a: VertexId, b: VertexId) -> &[NodeId] {
        self.edge_leaves
            .get(&EdgeKey::new(a, b))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Edges of the leaf mesh with a single incident leaf.
    pub fn boundary_edges(&self) -> Vec<EdgeKey> {
        let mut out: Vec<_> = self
            .edge_leaves
            .iter()
            .filter(|(_, inc)| inc.len() == 1)
            .map(|(e, _)| *e)
            .collect();
        out.sort();
        out
    }

    /// Bisects a leaf without any closure. The midpoint of the refinement
    /// edge is shared with a neighbour that already bisected the same edge.
    pub fn bisect(&mut self, node: NodeId) -> Result<[NodeId; 2]> {
        if !self.nodes[node].is_leaf() {
            return Err(Error::NotALeaf(node));
        }
        let parent = self.nodes[node].clone();
        let [v0, v1, v2] = parent.vertices;
        let key = EdgeKey::new(v0, v1);
        let child_gen = parent.gen + 1;

        let m = match self.midpoints.get(&key) {
            Some(&m) => {
                let vert = &mut self.vertices[m];
                vert.gen = vert.gen.min(child_gen);
                m
            }
            None => {
                let on_gamma = self.gamma_edges.contains(&key);
                let coords = geometry::midpoint(&self.vertices[v0].coords, &self.vertices[v1].coords);
                let m = self.vertices.len();
                self.vertices.push(Vertex {
                    coords,
                    gen: child_gen,
                    on_gamma,
                    parent_edge: Some([v0, v1]),
                });
                self.midpoints.insert(key, m);
                if on_gamma {
                    self.gamma_edges.insert(EdgeKey::new(v0, m));
                    self.gamma_edges.insert(EdgeKey::new(m, v1));
                }
                m
            }
        };

        let first = self.nodes.len();
        let children = [first, first + 1];
        for verts in [[v2, v0, m], [v1, v2, m]] {
            self.nodes.push(TriNode {
                vertices: verts,
                gen: child_gen,
                parent: Some(node),
                children: None,
                chart: parent.chart,
                root: parent.root,
                area: 0.5 * parent.area,
            });
        }
        self.nodes[node].children = Some(children);

        for e in parent.edges() {
            if let Some(inc) = self.edge_leaves.get_mut(&e) {
                inc.retain(|&t| t != node);
                if inc.is_empty() {
                    self.edge_leaves.remove(&e);
                }
            }
        }
        for c in children {
            for e in self.nodes[c].edges() {
                self.edge_leaves.entry(e).or_default().push(c);
            }
        }
        self.n_leaves += 1;
        Ok(children)
    }

    /// Bisects every marked leaf (that is still a leaf when reached) and
    /// restores conformity by recursive bisection of refinement-edge
    /// neighbours. Returns the new leaf set.
    pub fn refine_conforming(&mut self, marked: &[NodeId]) -> Result<Vec<NodeId>> {
        for &t in marked {
            if t >= self.nodes.len() {
                return Err(Error::NotALeaf(t));
            }
        }
        for &t in marked {
            if self.nodes[t].is_leaf() {
                self.refine_leaf(t, 0)?;
            }
        }
        Ok(self.leaves())
    }

    /// Bisects all leaves once.
    pub fn refine_uniform(&mut self) -> Result<Vec<NodeId>> {
        let leaves = self.leaves();
        self.refine_conforming(&leaves)
    }

    fn refine_leaf(&mut self, t: NodeId, depth: usize) -> Result<()> {
        if depth > self.n_leaves {
            return Err(Error::ClosureDepthExceeded(depth));
        }
        loop {
            let key = self.nodes[t].refinement_edge();
            let neighbour = self
                .edge_leaves
                .get(&key)
                .and_then(|inc| inc.iter().copied().find(|&n| n != t));
            match neighbour {
                None => {
                    self.bisect(t)?;
                    return Ok(());
                }
                Some(n) if self.nodes[n].refinement_edge() == key => {
                    self.bisect(t)?;
                    self.bisect(n)?;
                    return Ok(());
                }
                Some(n) => self.refine_leaf(n, depth + 1)?,
            }
        }
    }

    /// Serializes the leaf mesh in the ASCII mesh format.
    pub fn to_ascii(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let [x, y, z] = v.coords;
            if v.on_gamma {
                let _ = writeln!(out, "v {x:e} {y:e} {z:e} g");
            } else {
                let _ = writeln!(out, "v {x:e} {y:e} {z:e}");
            }
        }
        for n in self.leaves() {
            let node = &self.nodes[n];
            let [a, b, c] = node.vertices;
            let _ = writeln!(out, "t {a} {b} {c} {}", node.chart);
        }
        let mut gamma: Vec<_> = self
            .gamma_edges
            .iter()
            .filter(|e| self.edge_leaves.contains_key(e))
            .copied()
            .collect();
        gamma.sort();
        for e in gamma {
            let _ = writeln!(out, "ge {} {}", e.0, e.1);
        }
        out
    }

    pub fn leaf_description(&self) -> MeshDescription {
        parse_ascii(&self.to_ascii()).expect("serializer emits valid ASCII")
    }
}

/// Parses the ASCII mesh format: `v x y z [g]`, `t i j k c`, `ge i j`.
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_ascii(text: &str) -> Result<MeshDescription> {
    let mut desc = MeshDescription::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| Error::Parse {
            line: lineno + 1,
            msg: msg.to_string(),
        };
        let mut fields = line.split_whitespace();
        let tag = fields.next().unwrap_or_default();
        let rest: Vec<&str> = fields.collect();
        match tag {
            "v" => {
                if rest.len() < 3 || rest.len() > 4 || (rest.len() == 4 && rest[3] != "g") {
                    return Err(err("expected `v x y z [g]`"));
                }
                let mut p = [0.0; 3];
                for (k, f) in rest[..3].iter().enumerate() {
                    p[k] = f.parse().map_err(|_| err("bad coordinate"))?;
                }
                desc.coords.push(p);
            }
            "t" => {
                if rest.len() != 4 {
                    return Err(err("expected `t i j k c`"));
                }
                let ids: Vec<usize> = rest
                    .iter()
                    .map(|f| f.parse().map_err(|_| err("bad index")))
                    .collect::<Result<_>>()?;
                desc.triangles.push(([ids[0], ids[1], ids[2]], ids[3]));
            }
            "ge" => {
                if rest.len() != 2 {
                    return Err(err("expected `ge i j`"));
                }
                let a = rest[0].parse().map_err(|_| err("bad index"))?;
                let b = rest[1].parse().map_err(|_| err("bad index"))?;
                desc.gamma_edges.push([a, b]);
            }
            _ => return Err(err("unknown record")),
        }
    }
    Ok(desc)
}

/// Boundary of the cube `[0, side]^3`, two
/// triangles per face. The choice of diagonals fixes the condition number
/// of discrete operators on the coarsest mesh. Each face is split along a diagonal which is the
/// refinement edge of both of its triangles; cube edges are refinement edges
/// of neither, so the matching condition holds. Chart ids are face indices.
pub fn cube_surface(side: f64) -> MeshDescription {
    let coords: Vec<Point> = (0..8)
        .map(|i| {
            [
                if i & 1 == 0 { 0.0 } else { side },
                if i & 2 == 0 { 0.0 } else { side },
                if i & 4 == 0 { 0.0 } else { side },
            ]
        })
        .collect();
    // Corners of each face in cyclic order, oriented outward.
    let faces: [[usize; 4]; 6] = [
        [0, 2, 3, 1], // z = 0
        [4, 5, 7, 6], // z = side
        [0, 1, 5, 4], // y = 0
        [2, 6, 7, 3], // y = side
        [0, 4, 6, 2], // x = 0
        [1, 3, 7, 5], // x = side
    ];
    // faces split along (b, d) instead of (a, c)
    let flipped = [false, true, true, false, false, false];
    let mut triangles = Vec::with_capacity(12);
    for (f, &[a, b, c, d]) in faces.iter().enumerate() {
        if flipped[f] {
            triangles.push(([b, d, c], f));
            triangles.push(([d, b, a], f));
        } else {
            triangles.push(([a, c, b], f));
            triangles.push(([c, a, d], f));
        }
    }
    MeshDescription {
        coords,
        triangles,
        gamma_edges: Vec::new(),
    }
}

/// Unit square split by both diagonals into four triangles whose newest
/// vertex is the centre. All four sides belong to gamma.
pub fn unit_square() -> MeshDescription {
    let coords = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.5, 0.5, 0.0],
    ];
    let triangles = vec![([0, 1, 4], 0), ([1, 2, 4], 0), ([2, 3, 4], 0), ([3, 0, 4], 0)];
    let gamma_edges = vec![[0, 1], [1, 2], [2, 3], [3, 0]];
    MeshDescription {
        coords,
        triangles,
        gamma_edges,
    }
}

/// Unit square split along the diagonal `(0, 2)`, which is the refinement
/// edge of both triangles.
pub fn unit_square_two_triangles(with_gamma: bool) -> MeshDescription {
    let coords = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
    let triangles = vec![([0, 2, 1], 0), ([2, 0, 3], 0)];
    let gamma_edges = if with_gamma {
        vec![[0, 1], [1, 2], [2, 3], [3, 0]]
    } else {
        Vec::new()
    };
    MeshDescription {
        coords,
        triangles,
        gamma_edges,
    }
}
