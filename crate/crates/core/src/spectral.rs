//! Extreme eigenvalues of preconditioned operators and a PCG solver.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::LinearOperator;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralResult {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Extreme Ritz values after each step.
    pub history: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub tol: f64,
    pub maxit: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-6,
            maxit: 400,
            seed: 0,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn check_dims(a: &dyn LinearOperator, g: &dyn LinearOperator) -> Result<usize> {
    let n = a.dim();
    if g.dim() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: g.dim(),
        });
    }
    Ok(n)
}

/// Lanczos on `GA`, which is self-adjoint in the `A` inner product, with full
/// reorthogonalization. Stops once both extreme Ritz pairs have residual
/// below `tol` relative to their Ritz value, or when the Krylov space is
/// exhausted. Hitting `maxit` returns the current estimate with
/// `converged == false`.
pub fn lanczos_condition(
    a: &dyn LinearOperator,
    g: &dyn LinearOperator,
    opts: &LanczosOptions,
) -> Result<SpectralResult> {
    let n = check_dims(a, g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut av = vec![0.0; n];
    a.apply(&v, &mut av);
    let nrm2 = dot(&v, &av);
    if nrm2 <= 0.0 || !nrm2.is_finite() {
        return Err(Error::InnerProductBreakdown(nrm2));
    }
    let s = 1.0 / nrm2.sqrt();
    v.iter_mut().for_each(|x| *x *= s);
    av.iter_mut().for_each(|x| *x *= s);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut a_basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut history = Vec::new();
    let mut w = vec![0.0; n];
    let mut aw = vec![0.0; n];
    let maxit = opts.maxit.min(n);
    let mut result = None;
    for k in 0..maxit {
        g.apply(&av, &mut w);
        let alpha = dot(&av, &w);
        axpy(-alpha, &v, &mut w);
        if let (Some(prev), Some(&beta)) = (basis.last(), betas.last()) {
            axpy(-beta, prev, &mut w);
        }
        basis.push(std::mem::take(&mut v));
        a_basis.push(std::mem::take(&mut av));
        alphas.push(alpha);
        for _ in 0..2 {
            for (q, aq) in basis.iter().zip(&a_basis) {
                let c = dot(aq, &w);
                axpy(-c, q, &mut w);
            }
        }
        a.apply(&w, &mut aw);
        let beta2 = dot(&w, &aw);
        let scale = alphas.iter().fold(0f64, |m, x| m.max(x.abs()));
        if beta2 < -1e-10 * scale * scale || !beta2.is_finite() {
            return Err(Error::InnerProductBreakdown(beta2));
        }
        let beta = beta2.max(0.0).sqrt();

        let m = alphas.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j || j + 1 == i {
                betas[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let (imin, lmin) = eig.eigenvalues.argmin();
        let (imax, lmax) = eig.eigenvalues.argmax();
        history.push((lmin, lmax));
        let res_min = beta * eig.eigenvectors[(m - 1, imin)].abs();
        let res_max = beta * eig.eigenvectors[(m - 1, imax)].abs();
        let exhausted = beta <= 1e-12 * scale || k + 1 == n;
        let done = exhausted || (res_min <= opts.tol * lmin.abs() && res_max <= opts.tol * lmax.abs() && m >= 2);
        if done || k + 1 == maxit {
            if lmin <= 0.0 {
                return Err(Error::InnerProductBreakdown(lmin));
            }
            result = Some(SpectralResult {
                lambda_min: lmin,
                lambda_max: lmax,
                kappa: lmax / lmin,
                iterations: m,
                converged: done,
                history: std::mem::take(&mut history),
            });
            break;
        }
        betas.push(beta);
        v = w.iter().map(|x| x / beta).collect();
        av = aw.iter().map(|x| x / beta).collect();
    }
    result.ok_or(Error::NotConverged(maxit))
}

/// Preconditioned conjugate gradients to relative residual `tol`.
pub fn pcg_solve(
    a: &dyn LinearOperator,
    g: &dyn LinearOperator,
    rhs: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = check_dims(a, g)?;
    if rhs.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let mut x = vec![0.0; n];
    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = rhs.to_vec();
    let mut z = vec![0.0; n];
    g.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=maxit {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::InnerProductBreakdown(pap));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return Ok((x, it));
        }
        g.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NotConverged(maxit))
}

/// Extreme eigenvalues of `GA` by a dense symmetric eigensolve of
/// `L^T A L` with `G = L L^T`.
pub fn dense_condition(a: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<(f64, f64)> {
    let l = g.clone().cholesky().ok_or(Error::SingularOperand)?.unpack();
    let m = l.transpose() * a * &l;
    let m = (&m + m.transpose()) * 0.5;
    let ev: DVector<f64> = m.symmetric_eigenvalues();
    Ok((ev.min(), ev.max()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Identity;

    fn spd(n: usize, seed: u64, spread: f64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
        let d = DVector::from_fn(n, |i, _| 1.0 + spread * i as f64 / (n - 1) as f64);
        &q * DMatrix::from_diagonal(&d) * q.transpose()
    }

    #[test]
    fn perfect_preconditioner_gives_unit_condition() {
        let a = spd(30, 1, 50.0);
        let g = a.clone().try_inverse().unwrap();
        let r = lanczos_condition(&a, &g, &LanczosOptions::default()).unwrap();
        assert!((r.kappa - 1.0).abs() < 1e-8);
        assert!(r.converged);
    }

    #[test]
    fn identity_preconditioner_recovers_dense_condition() {
        let a = spd(120, 2, 99.0);
        let ev = a.symmetric_eigenvalues();
        let r = lanczos_condition(&a, &Identity(120), &LanczosOptions::default()).unwrap();
        assert!((r.kappa - ev.max() / ev.min()).abs() < 1e-6 * r.kappa);
    }

    #[test]
    fn matches_generalized_dense_solve_and_is_scale_invariant() {
        let a = spd(80, 3, 40.0);
        let g = spd(80, 4, 7.0);
        let (lo, hi) = dense_condition(&a, &g).unwrap();
        let opts = LanczosOptions::default();
        let r = lanczos_condition(&a, &g, &opts).unwrap();
        assert!((r.kappa - hi / lo).abs() < 1e-4 * r.kappa);
        let scaled = lanczos_condition(&(&a * 3.5), &(&g * 0.2), &opts).unwrap();
        assert!((scaled.kappa - r.kappa).abs() < 1e-4 * r.kappa);
    }

    #[test]
    fn ritz_intervals_are_nested() {
        let a = spd(60, 5, 20.0);
        let r = lanczos_condition(
            &a,
            &Identity(60),
            &LanczosOptions {
                tol: 0.0,
                maxit: 40,
                seed: 0,
            },
        )
        .unwrap();
        assert!(!r.converged);
        for w in r.history.windows(2) {
            assert!(w[1].0 <= w[0].0 + 1e-12 && w[1].1 >= w[0].1 - 1e-12);
        }
    }

    #[test]
    fn indefinite_operator_is_detected() {
        let mut a = spd(10, 6, 3.0);
        a[(0, 0)] = -50.0;
        assert!(matches!(
            lanczos_condition(&a, &Identity(10), &LanczosOptions::default()),
            Err(Error::InnerProductBreakdown(_))
        ));
    }

    #[test]
    fn pcg_zero_rhs_and_dense_solution() {
        let a = spd(50, 7, 30.0);
        let (x, it) = pcg_solve(&a, &Identity(50), &[0.0; 50], 1e-10, 100).unwrap();
        assert_eq!(it, 0);
        assert!(x.iter().all(|&v| v == 0.0));
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let tol = 1e-10;
        let (x, _) = pcg_solve(&a, &Identity(50), &b, tol, 500).unwrap();
        let exact = a.clone().cholesky().unwrap().solve(&DVector::from_column_slice(&b));
        let err = (DVector::from_vec(x) - &exact).norm() / exact.norm();
        assert!(err < tol * 10.0, "{err}");
        assert!(matches!(
            pcg_solve(&a, &Identity(50), &b, 1e-14, 2),
            Err(Error::NotConverged(2))
        ));
    }
}
