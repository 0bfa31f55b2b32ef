//! The multilevel operator
//! `B^S = E^T (sum_j 2^{j(2s/d-1)} D_j^T D_j) E` with
//! `D_j = H_j R_j - P_j H_{j-1} R_{j-1}`.
//!
//! The fast path sweeps the forest once upward to get every `R_j E u`,
//! evaluates `D_j` only at the active vertices of each level from
//! precomputed stencils, and runs the adjoint sweep downward.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hierarchy::LevelHierarchy;
use crate::mesh::{MeshForest, NodeId, VertexId};
use crate::operator::LinearOperator;
use crate::sparse::CsrMatrix;
use crate::transfer::{self, project_children, project_children_adjoint};

/// Surface dimension.
pub const DIM: usize = 2;

#[derive(Clone, Copy, Debug)]
struct Term {
    node: NodeId,
    k: usize,
    w: f64,
}

#[derive(Clone, Debug, Default)]
struct LevelStencil {
    vertices: Vec<VertexId>,
    offsets: Vec<usize>,
    terms: Vec<Term>,
}

#[derive(Clone, Debug)]
pub struct MultiLevelOperator {
    hierarchy: LevelHierarchy,
    s: f64,
    level_scale: Vec<f64>,
    children: Vec<Option<[NodeId; 2]>>,
    leaf_dofs: Vec<(NodeId, [Option<usize>; 3])>,
    stencils: Vec<LevelStencil>,
    n_dofs: usize,
}

/// `2^{j(2s/d - 1)}` for `j = 0..=max_level`.
pub fn level_scales(s: f64, max_level: usize) -> Vec<f64> {
    (0..=max_level)
        .map(|j| 2f64.powf(j as f64 * (2.0 * s / DIM as f64 - 1.0)))
        .collect()
}

fn check_order(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("order s = {s} outside [0, 1]")))
    }
}

fn push_average(forest: &MeshForest, hier: &LevelHierarchy, j: usize, v: VertexId, factor: f64, out: &mut Vec<Term>) {
    let level = hier.level(j);
    let total = level.patch_area(forest, v);
    for &n in level.patch(v) {
        let node = forest.node(n);
        let k = node
            .vertices
            .iter()
            .position(|&x| x == v)
            .expect("patch element contains vertex");
        out.push(Term {
            node: n,
            k,
            w: factor * node.area / total,
        });
    }
}

impl MultiLevelOperator {
    pub fn new(forest: &MeshForest, hierarchy: LevelHierarchy, s: f64) -> Result<Self> {
        check_order(s)?;
        let level_scale = level_scales(s, hierarchy.max_level());
        let children = forest.nodes().iter().map(|n| n.children).collect();
        let leaf = hierarchy.leaf_level();
        let leaf_dofs = leaf
            .elements
            .iter()
            .map(|&n| (n, forest.node(n).vertices.map(|v| leaf.interior_index(v))))
            .collect();
        let n_dofs = leaf.interior.len();
        let stencils = (0..=hierarchy.max_level())
            .map(|j| Self::level_stencil(forest, &hierarchy, j))
            .collect();
        Ok(MultiLevelOperator {
            hierarchy,
            s,
            level_scale,
            children,
            leaf_dofs,
            stencils,
            n_dofs,
        })
    }

    pub fn from_forest(forest: &MeshForest, s: f64) -> Result<Self> {
        Self::new(forest, LevelHierarchy::extract(forest), s)
    }

    fn level_stencil(forest: &MeshForest, hier: &LevelHierarchy, j: usize) -> LevelStencil {
        let mut st = LevelStencil {
            offsets: vec![0],
            ..Default::default()
        };
        let mut row = Vec::new();
        for &v in &hier.active[j] {
            row.clear();
            push_average(forest, hier, j, v, 1.0, &mut row);
            if j > 0 {
                if hier.level(j - 1).contains_vertex(v) {
                    push_average(forest, hier, j - 1, v, -1.0, &mut row);
                } else {
                    let edge = forest.vertex(v).parent_edge.expect("new vertex is a midpoint");
                    for e in edge {
                        if !forest.vertex(e).on_gamma {
                            push_average(forest, hier, j - 1, e, -0.5, &mut row);
                        }
                    }
                }
            }
            row.sort_by_key(|t| (t.node, t.k));
            let mut merged: Vec<Term> = Vec::with_capacity(row.len());
            for t in &row {
                match merged.last_mut() {
                    Some(last) if last.node == t.node && last.k == t.k => last.w += t.w,
                    _ => merged.push(*t),
                }
            }
            merged.retain(|t| t.w.abs() > 1e-15);
            st.terms.extend(merged);
            st.vertices.push(v);
            st.offsets.push(st.terms.len());
        }
        st
    }

    pub fn hierarchy(&self) -> &LevelHierarchy {
        &self.hierarchy
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn level_scale(&self) -> &[f64] {
        &self.level_scale
    }

    pub fn num_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn num_leaves(&self) -> usize {
        self.leaf_dofs.len()
    }

    pub fn apply_bs(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.apply_counted(u).map(|(y, _)| y)
    }

    /// [`apply_bs`](Self::apply_bs) together with the number of floating
    /// point operations it performed.
    pub fn apply_counted(&self, u: &[f64]) -> Result<(Vec<f64>, u64)> {
        if u.len() != self.n_dofs {
            return Err(Error::SizeMismatch {
                expected: self.n_dofs,
                got: u.len(),
            });
        }
        let mut out = vec![0.0; self.n_dofs];
        let flops = self.apply_into(u, &mut out);
        Ok((out, flops))
    }

    fn apply_into(&self, u: &[f64], out: &mut [f64]) -> u64 {
        if self.stencils.len() == 1 {
            // H_0 R_0 E is the identity on the initial mesh
            for (o, x) in out.iter_mut().zip(u) {
                *o += self.level_scale[0] * x;
            }
            return self.n_dofs as u64;
        }
        let mut flops = 0u64;
        let n_nodes = self.children.len();
        let mut values = vec![[0.0; 3]; n_nodes];
        for (n, dofs) in &self.leaf_dofs {
            values[*n] = dofs.map(|d| d.map_or(0.0, |i| u[i]));
        }
        for n in (0..n_nodes).rev() {
            if let Some([c0, c1]) = self.children[n] {
                values[n] = project_children(&values[c0], &values[c1]);
                // 12 nonzero weights: 12 multiplications, 9 additions
                flops += 21;
            }
        }
        let mut adj = vec![[0.0; 3]; n_nodes];
        for (st, &scale) in self.stencils.iter().zip(&self.level_scale) {
            for r in 0..st.vertices.len() {
                let terms = &st.terms[st.offsets[r]..st.offsets[r + 1]];
                let d: f64 = terms.iter().map(|t| t.w * values[t.node][t.k]).sum();
                let sd = scale * d;
                for t in terms {
                    adj[t.node][t.k] += t.w * sd;
                }
                flops += 4 * terms.len() as u64 + 1;
            }
        }
        for n in 0..n_nodes {
            if let Some([c0, c1]) = self.children[n] {
                let (a0, a1) = project_children_adjoint(&adj[n]);
                for k in 0..3 {
                    adj[c0][k] += a0[k];
                    adj[c1][k] += a1[k];
                }
                flops += 27;
            }
        }
        for (n, dofs) in &self.leaf_dofs {
            for (k, d) in dofs.iter().enumerate() {
                if let Some(i) = d {
                    out[*i] += adj[*n][k];
                    flops += 1;
                }
            }
        }
        flops
    }

    /// Column-by-column materialization of the fast operator.
    pub fn to_dense(&self) -> DMatrix<f64> {
        crate::operator::to_dense(self)
    }

    /// Sparse materialization, for inspection only.
    pub fn to_sparse(&self) -> CsrMatrix {
        let mut t = Vec::new();
        let mut e = vec![0.0; self.n_dofs];
        let mut y = vec![0.0; self.n_dofs];
        for c in 0..self.n_dofs {
            e[c] = 1.0;
            y.fill(0.0);
            self.apply_into(&e, &mut y);
            t.extend(
                y.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(r, &v)| (r, c, v)),
            );
            e[c] = 0.0;
        }
        CsrMatrix::from_triplets(self.n_dofs, self.n_dofs, &t)
    }
}

impl LinearOperator for MultiLevelOperator {
    fn dim(&self) -> usize {
        self.n_dofs
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_dofs);
        y.fill(0.0);
        self.apply_into(x, y);
    }
}

/// Dense `Pi_j - P_j Pi_{j-1}` on leaf nodal vectors, rows indexed by `N_j^0`.
pub fn dense_difference(forest: &MeshForest, hier: &LevelHierarchy, j: usize) -> Result<DMatrix<f64>> {
    let pi = transfer::dense_pi(forest, hier, j)?;
    if j == 0 {
        return Ok(pi);
    }
    let coarse = transfer::dense_pi(forest, hier, j - 1)?;
    let p = transfer::dense_prolongation(forest, hier, j)?;
    Ok(pi - p * coarse)
}

/// Dense oracle `sum_j 2^{j(2s/d-1)} D_j^T D_j` built from [`transfer::dense_pi`].
pub fn assemble_bs_dense(forest: &MeshForest, hier: &LevelHierarchy, s: f64) -> Result<DMatrix<f64>> {
    check_order(s)?;
    let n = hier.leaf_level().interior.len();
    let scales = level_scales(s, hier.max_level());
    let mut b = DMatrix::zeros(n, n);
    for (j, scale) in scales.iter().enumerate() {
        let d = dense_difference(forest, hier, j)?;
        b += d.tr_mul(&d) * *scale;
    }
    Ok(b)
}
