//! P1 mass and stiffness matrices on the leaf mesh, restricted to the
//! vertices off `gamma`.

use crate::geometry;
use crate::mesh::{MeshForest, VertexId};
use crate::sparse::CsrMatrix;

/// Vertices of the leaf mesh not on `gamma`, ascending. This is the dof order.
pub fn interior_vertices(forest: &MeshForest) -> Vec<VertexId> {
    let mut v: Vec<_> = forest
        .leaves()
        .into_iter()
        .flat_map(|n| forest.node(n).vertices)
        .filter(|&v| !forest.vertex(v).on_gamma)
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn assemble(forest: &MeshForest, local: impl Fn(&[geometry::Point; 3]) -> [[f64; 3]; 3]) -> CsrMatrix {
    let dofs = interior_vertices(forest);
    let mut t = Vec::new();
    for n in forest.leaves() {
        let ids = forest.node(n).vertices.map(|v| dofs.binary_search(&v).ok());
        let k = local(&forest.corner_points(n));
        for a in 0..3 {
            for b in 0..3 {
                if let (Some(i), Some(j)) = (ids[a], ids[b]) {
                    t.push((i, j, k[a][b]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(dofs.len(), dofs.len(), &t)
}

pub fn local_mass(p: &[geometry::Point; 3]) -> [[f64; 3]; 3] {
    let area = geometry::triangle_area(&p[0], &p[1], &p[2]);
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

/// `(e_a . e_b) / (4|T|)` with `e_a` the edge opposite vertex `a`.
pub fn local_stiffness(p: &[geometry::Point; 3]) -> [[f64; 3]; 3] {
    let area = geometry::triangle_area(&p[0], &p[1], &p[2]);
    let e = [
        geometry::sub(&p[2], &p[1]),
        geometry::sub(&p[0], &p[2]),
        geometry::sub(&p[1], &p[0]),
    ];
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = geometry::dot(&e[a], &e[b]) / (4.0 * area);
        }
    }
    k
}

pub fn assemble_mass(forest: &MeshForest) -> CsrMatrix {
    assemble(forest, local_mass)
}

pub fn assemble_stiffness(forest: &MeshForest) -> CsrMatrix {
    assemble(forest, local_stiffness)
}
