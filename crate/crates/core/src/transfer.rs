//! Transfer operators between the level spaces.
//!
//! Nodal vectors hold one value per interior vertex of a level (`N_j^0`, in
//! ascending vertex order). Element-linear vectors hold three values per
//! element of a level, in the element's local vertex order.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry;
use crate::hierarchy::LevelHierarchy;
use crate::mesh::{MeshForest, NodeId};

pub type ElementLinear = Vec<[f64; 3]>;

/// Largest leaf count accepted by the dense oracles.
pub const DENSE_LIMIT: usize = 500;

/// L2 projection of a piecewise linear on the children of `(v0, v1, v2)`
/// onto linears on the parent. Rows are the parent vertices `v0, v1, v2`;
/// columns are the values of child `(v2, v0, m)` followed by child `(v1, v2, m)`.
pub const CHILD_TO_PARENT: [[f64; 6]; 3] = [
    [0.25, 0.75, 0.5, -0.25, -0.25, 0.0],
    [-0.25, -0.25, 0.0, 0.75, 0.25, 0.5],
    [0.5, 0.0, 0.0, 0.0, 0.5, 0.0],
];

#[inline]
pub(crate) fn project_children(c0: &[f64; 3], c1: &[f64; 3]) -> [f64; 3] {
    let x = [c0[0], c0[1], c0[2], c1[0], c1[1], c1[2]];
    let mut out = [0.0; 3];
    for (o, row) in out.iter_mut().zip(CHILD_TO_PARENT.iter()) {
        *o = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    }
    out
}

/// Transpose of [`project_children`].
#[inline]
pub(crate) fn project_children_adjoint(p: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let mut x = [0.0; 6];
    for (k, xk) in x.iter_mut().enumerate() {
        *xk = CHILD_TO_PARENT[0][k] * p[0] + CHILD_TO_PARENT[1][k] * p[1] + CHILD_TO_PARENT[2][k] * p[2];
    }
    ([x[0], x[1], x[2]], [x[3], x[4], x[5]])
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, got })
    }
}

/// Embedding of the continuous piecewise linears on the leaf mesh into the
/// discontinuous ones: each nodal value is copied to every incident element.
pub fn embed(forest: &MeshForest, hier: &LevelHierarchy, u: &[f64]) -> Result<ElementLinear> {
    let leaf = hier.leaf_level();
    check_len(leaf.interior.len(), u.len())?;
    Ok(leaf
        .elements
        .iter()
        .map(|&n| {
            forest
                .node(n)
                .vertices
                .map(|v| leaf.interior_index(v).map_or(0.0, |i| u[i]))
        })
        .collect())
}

/// Upward sweep: the L2 projection onto linears of every forest node, given
/// element-linear data on the leaves. Indexed by node id.
pub fn project_sweep(forest: &MeshForest, hier: &LevelHierarchy, x: &ElementLinear) -> Result<Vec<[f64; 3]>> {
    let leaf = hier.leaf_level();
    if x.len() != leaf.elements.len() {
        return Err(Error::LevelMismatch {
            expected: leaf.elements.len(),
            got: x.len(),
        });
    }
    let mut values = vec![[0.0; 3]; forest.nodes().len()];
    for (&n, v) in leaf.elements.iter().zip(x) {
        values[n] = *v;
    }
    // children always have larger ids than their parent
    for n in (0..forest.nodes().len()).rev() {
        if let Some([c0, c1]) = forest.node(n).children {
            values[n] = project_children(&values[c0], &values[c1]);
        }
    }
    Ok(values)
}

/// `R_j x` for `j = 0..=L`, each in the element order of level `j`.
pub fn project_levels(forest: &MeshForest, hier: &LevelHierarchy, x: &ElementLinear) -> Result<Vec<ElementLinear>> {
    let node_values = project_sweep(forest, hier, x)?;
    Ok(hier
        .levels
        .iter()
        .map(|l| l.elements.iter().map(|&n| node_values[n]).collect())
        .collect())
}

/// Area-weighted average of element-local values at the interior vertices of level `j`.
pub fn average(forest: &MeshForest, hier: &LevelHierarchy, j: usize, x: &ElementLinear) -> Result<Vec<f64>> {
    let level = hier.level(j);
    if x.len() != level.elements.len() {
        return Err(Error::LevelMismatch {
            expected: level.elements.len(),
            got: x.len(),
        });
    }
    let mut num = vec![0.0; level.interior.len()];
    let mut den = vec![0.0; level.interior.len()];
    for (&n, vals) in level.elements.iter().zip(x) {
        let node = forest.node(n);
        for (k, &v) in node.vertices.iter().enumerate() {
            if let Some(i) = level.interior_index(v) {
                num[i] += node.area * vals[k];
                den[i] += node.area;
            }
        }
    }
    Ok(num.iter().zip(&den).map(|(a, b)| a / b).collect())
}

/// Prolongation from level `j - 1` to level `j`. Surviving vertices keep
/// their value, new midpoints get the mean of their edge endpoints (gamma
/// vertices count as zero).
pub fn prolong(forest: &MeshForest, hier: &LevelHierarchy, j: usize, u: &[f64]) -> Result<Vec<f64>> {
    let fine = hier.level(j);
    if j == 0 {
        return Ok(vec![0.0; fine.interior.len()]);
    }
    let coarse = hier.level(j - 1);
    check_len(coarse.interior.len(), u.len())?;
    let coarse_value = |v| coarse.interior_index(v).map_or(0.0, |i| u[i]);
    Ok(fine
        .interior
        .iter()
        .map(|&v| {
            if coarse.contains_vertex(v) {
                coarse_value(v)
            } else {
                let [a, b] = forest
                    .vertex(v)
                    .parent_edge
                    .expect("vertex new at level j > 0 is a midpoint");
                0.5 * (coarse_value(a) + coarse_value(b))
            }
        })
        .collect())
}

fn leaf_descendants(forest: &MeshForest, n: NodeId, out: &mut Vec<NodeId>) {
    match forest.node(n).children {
        None => out.push(n),
        Some([a, b]) => {
            leaf_descendants(forest, a, out);
            leaf_descendants(forest, b, out);
        }
    }
}

/// Dense matrix of the averaging quasi-interpolator `Pi_j`, mapping leaf
/// nodal vectors to level-`j` nodal vectors. Each elementwise projection is
/// assembled from its definition (mass matrix and exact edge-midpoint
/// quadrature over the leaf descendants), independent of [`CHILD_TO_PARENT`].
pub fn dense_pi(forest: &MeshForest, hier: &LevelHierarchy, j: usize) -> Result<DMatrix<f64>> {
    let leaf = hier.leaf_level();
    if leaf.elements.len() > DENSE_LIMIT {
        return Err(Error::MeshTooLarge(leaf.elements.len(), DENSE_LIMIT));
    }
    let level = hier.level(j);
    let mut pi = DMatrix::zeros(level.interior.len(), leaf.interior.len());
    let mut den = vec![0.0; level.interior.len()];
    let mut leaves = Vec::new();
    for &t in &level.elements {
        let tri = forest.corner_points(t);
        let area_t = forest.geometric_area(t);
        let mass = Matrix3::from_fn(|a, b| area_t / 12.0 * if a == b { 2.0 } else { 1.0 });
        let mass_inv = mass.try_inverse().expect("mass matrix is SPD");
        leaves.clear();
        leaf_descendants(forest, t, &mut leaves);
        // columns: leaf vertex -> load vector against the three parent hats
        let mut loads: Vec<(usize, Vector3<f64>)> = Vec::new();
        for &l in &leaves {
            let pts = forest.corner_points(l);
            let area_l = forest.geometric_area(l);
            let verts = forest.node(l).vertices;
            for e in 0..3 {
                let (p, q) = (e, (e + 1) % 3);
                let mid = geometry::midpoint(&pts[p], &pts[q]);
                let (bary, _) = geometry::barycentric(&tri, &mid);
                for k in [p, q] {
                    if let Some(col) = leaf.interior_index(verts[k]) {
                        let w = area_l / 3.0 * 0.5;
                        let load = Vector3::new(bary[0], bary[1], bary[2]) * w;
                        match loads.iter_mut().find(|(c, _)| *c == col) {
                            Some((_, acc)) => *acc += load,
                            None => loads.push((col, load)),
                        }
                    }
                }
            }
        }
        let node = forest.node(t);
        for (k, &v) in node.vertices.iter().enumerate() {
            let Some(row) = level.interior_index(v) else { continue };
            den[row] += area_t;
            for (col, load) in &loads {
                let coef = mass_inv * load;
                pi[(row, *col)] += area_t * coef[k];
            }
        }
    }
    for (r, d) in den.iter().enumerate() {
        pi.row_mut(r).scale_mut(1.0 / d);
    }
    Ok(pi)
}

/// Dense prolongation from level `j - 1` to level `j`, by evaluating the
/// coarse piecewise linear at the fine vertex positions.
pub fn dense_prolongation(forest: &MeshForest, hier: &LevelHierarchy, j: usize) -> Result<DMatrix<f64>> {
    let fine = hier.level(j);
    if j == 0 {
        return Ok(DMatrix::zeros(fine.interior.len(), 0));
    }
    let coarse = hier.level(j - 1);
    if fine.elements.len() > DENSE_LIMIT {
        return Err(Error::MeshTooLarge(fine.elements.len(), DENSE_LIMIT));
    }
    let mut p = DMatrix::zeros(fine.interior.len(), coarse.interior.len());
    for (r, &v) in fine.interior.iter().enumerate() {
        let x = forest.vertex(v).coords;
        let (t, bary) = coarse
            .elements
            .iter()
            .find_map(|&t| {
                let tri = forest.corner_points(t);
                let scale = geometry::diameter(&tri[0], &tri[1], &tri[2]);
                let (bary, h) = geometry::barycentric(&tri, &x);
                (h < 1e-12 * scale && bary.iter().all(|&b| b > -1e-12)).then_some((t, bary))
            })
            .expect("every fine vertex lies in a coarse element");
        for (k, &cv) in forest.node(t).vertices.iter().enumerate() {
            if let Some(c) = coarse.interior_index(cv) {
                p[(r, c)] += bary[k];
            }
        }
    }
    Ok(p)
}

/// Dense matrix of `E`, rows indexed by (leaf element, local vertex).
pub fn dense_embedding(forest: &MeshForest, hier: &LevelHierarchy) -> DMatrix<f64> {
    let leaf = hier.leaf_level();
    let mut e = DMatrix::zeros(3 * leaf.elements.len(), leaf.interior.len());
    for (i, &n) in leaf.elements.iter().enumerate() {
        for (k, &v) in forest.node(n).vertices.iter().enumerate() {
            if let Some(c) = leaf.interior_index(v) {
                e[(3 * i + k, c)] = 1.0;
            }
        }
    }
    e
}
