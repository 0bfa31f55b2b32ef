//! Preconditioner for piecewise constant trial spaces,
//! `G = D^{-1} (p^T B^S p + q^T B^B q) D^{-1}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::LevelHierarchy;
use crate::mesh::MeshForest;
use crate::multilevel::{self, MultiLevelOperator, DIM};
use crate::operator::LinearOperator;
use crate::sparse::CsrMatrix;

pub const DEFAULT_BETA: f64 = 5.3;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PrecondConfig {
    pub s: f64,
    pub beta: f64,
}

impl Default for PrecondConfig {
    fn default() -> Self {
        PrecondConfig {
            s: 0.5,
            beta: DEFAULT_BETA,
        }
    }
}

/// The diagonal and sparse pieces of `G`, in ascending leaf order.
#[derive(Clone, Debug)]
pub struct DualMatrices {
    pub d_diag: Vec<f64>,
    /// `N_L^0 x #T`, entries `1 / valence`.
    pub p: CsrMatrix,
    /// `#T x #T`.
    pub q: CsrMatrix,
    pub bb_diag: Vec<f64>,
}

pub fn assemble_dual_matrices(
    forest: &MeshForest,
    hier: &LevelHierarchy,
    config: &PrecondConfig,
) -> Result<DualMatrices> {
    if config.beta.is_nan() || config.beta <= 0.0 {
        return Err(Error::InvalidSpec(format!("beta = {} must be positive", config.beta)));
    }
    let leaf = hier.leaf_level();
    let elements = &leaf.elements;
    let d_diag: Vec<f64> = elements.iter().map(|&n| forest.node(n).area).collect();
    let exponent = 1.0 - 2.0 * config.s / DIM as f64;
    let bb_diag = d_diag.iter().map(|a| config.beta * a.powf(exponent)).collect();

    let mut pt = Vec::with_capacity(3 * elements.len());
    for (t, &n) in elements.iter().enumerate() {
        for &v in &forest.node(n).vertices {
            if let Some(i) = leaf.interior_index(v) {
                pt.push((i, t, 1.0 / leaf.valence(v) as f64));
            }
        }
    }
    let p = CsrMatrix::from_triplets(leaf.interior.len(), elements.len(), &pt);

    let mut qt = Vec::new();
    for t in 0..elements.len() {
        qt.push((t, t, 1.0));
    }
    let pos = |n| elements.binary_search(&n).expect("patch element is a leaf");
    let factor = 1.0 / (DIM as f64 + 1.0);
    for &v in &leaf.interior {
        let patch = leaf.patch(v);
        let w = factor / patch.len() as f64;
        for &a in patch {
            for &b in patch {
                qt.push((pos(a), pos(b), -w));
            }
        }
    }
    let q = CsrMatrix::from_triplets(elements.len(), elements.len(), &qt);
    Ok(DualMatrices { d_diag, p, q, bb_diag })
}

#[derive(Clone, Debug)]
pub struct Preconditioner {
    pub config: PrecondConfig,
    pub parts: DualMatrices,
    pub bs: MultiLevelOperator,
}

impl Preconditioner {
    pub fn new(forest: &MeshForest, config: PrecondConfig) -> Result<Self> {
        let hier = LevelHierarchy::extract(forest);
        let parts = assemble_dual_matrices(forest, &hier, &config)?;
        let bs = MultiLevelOperator::new(forest, hier, config.s)?;
        Ok(Preconditioner { config, parts, bs })
    }

    pub fn num_elements(&self) -> usize {
        self.parts.d_diag.len()
    }

    pub fn apply_g(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.apply_counted(r).map(|(y, _)| y)
    }

    /// [`apply_g`](Self::apply_g) with its floating point operation count.
    pub fn apply_counted(&self, r: &[f64]) -> Result<(Vec<f64>, u64)> {
        let n = self.num_elements();
        if r.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: r.len(),
            });
        }
        let DualMatrices { d_diag, p, q, bb_diag } = &self.parts;
        let x: Vec<f64> = r.iter().zip(d_diag).map(|(a, d)| a / d).collect();
        let (bs, mut flops) = self.bs.apply_counted(&p.matvec(&x)?)?;
        let mut y = p.transpose_matvec(&bs)?;
        let mut qx = q.matvec(&x)?;
        for (v, b) in qx.iter_mut().zip(bb_diag) {
            *v *= b;
        }
        let bubble = q.transpose_matvec(&qx)?;
        for ((yi, bi), d) in y.iter_mut().zip(&bubble).zip(d_diag) {
            *yi = (*yi + bi) / d;
        }
        flops += (4 * p.nnz() + 4 * q.nnz() + 4 * n) as u64;
        Ok((y, flops))
    }

    /// The two summands of `G` as dense matrices, with `beta = 1` in the second.
    pub fn dense_parts(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let dinv = DMatrix::from_diagonal(&DVector::from_iterator(
            self.num_elements(),
            self.parts.d_diag.iter().map(|d| 1.0 / d),
        ));
        let p = self.parts.p.to_dense();
        let q = self.parts.q.to_dense();
        let b = self.bs.to_dense();
        let bb = DMatrix::from_diagonal(&DVector::from_iterator(
            self.num_elements(),
            self.parts.bb_diag.iter().map(|x| x / self.config.beta),
        ));
        let first = &dinv * p.transpose() * b * &p * &dinv;
        let second = &dinv * q.transpose() * bb * &q * &dinv;
        (first, second)
    }
}

impl LinearOperator for Preconditioner {
    fn dim(&self) -> usize {
        self.num_elements()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let r = self.apply_g(x).expect("dimension checked by caller");
        y.copy_from_slice(&r);
    }
}

/// Dense `G` assembled from its defining formulas and the dense multilevel
/// oracle; only for small meshes.
pub fn assemble_g_dense(forest: &MeshForest, config: &PrecondConfig) -> Result<DMatrix<f64>> {
    let hier = LevelHierarchy::extract(forest);
    let parts = assemble_dual_matrices(forest, &hier, config)?;
    let b = multilevel::assemble_bs_dense(forest, &hier, config.s)?;
    let n = parts.d_diag.len();
    let mut dinv = DMatrix::zeros(n, n);
    let mut bb = DMatrix::zeros(n, n);
    for i in 0..n {
        dinv[(i, i)] = 1.0 / parts.d_diag[i];
        bb[(i, i)] = parts.bb_diag[i];
    }
    let p = parts.p.to_dense();
    let q = parts.q.to_dense();
    Ok(&dinv * (p.transpose() * b * &p + q.transpose() * bb * &q) * &dinv)
}

/// Largest eigenvalue of `X A` for symmetric `X` and SPD `A`.
pub fn spectral_radius(x: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64> {
    let l = a.clone().cholesky().ok_or(Error::SingularOperand)?.unpack();
    let m = l.transpose() * x * &l;
    let m = (&m + m.transpose()) * 0.5;
    Ok(m.symmetric_eigenvalues().max())
}

/// The `beta` for which both summands of `G A` have the same spectral radius.
pub fn calibrate_beta(forest: &MeshForest, s: f64, a: &DMatrix<f64>) -> Result<f64> {
    let prec = Preconditioner::new(forest, PrecondConfig { s, beta: 1.0 })?;
    if a.nrows() != prec.num_elements() {
        return Err(Error::SizeMismatch {
            expected: prec.num_elements(),
            got: a.nrows(),
        });
    }
    let (first, second) = prec.dense_parts();
    let r1 = spectral_radius(&first, a)?;
    let r2 = spectral_radius(&second, a)?;
    if r1 <= 0.0 || r2 <= 0.0 {
        return Err(Error::SingularOperand);
    }
    Ok(r1 / r2)
}
