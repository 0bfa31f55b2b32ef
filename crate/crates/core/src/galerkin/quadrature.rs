//! Quadrature rules and closed-form integrals of the `1/|x - y|` kernel over flat triangles.

use crate::geometry::{self, Point};

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n > 0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Collapsed tensor Gauss rule on the reference triangle: barycentric
/// points and weights summing to one. Exact for polynomials of degree `2n - 2`.
pub fn triangle_rule(n: usize) -> Vec<([f64; 3], f64)> {
    let g = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for &(u, wu) in &g {
        for &(t, wt) in &g {
            let v = t * (1.0 - u);
            out.push(([1.0 - u - v, u, v], 2.0 * wu * wt * (1.0 - u)));
        }
    }
    out
}

pub fn map_point(tri: &[Point; 3], bary: &[f64; 3]) -> Point {
    let mut p = [0.0; 3];
    for (k, corner) in tri.iter().enumerate() {
        for d in 0..3 {
            p[d] += bary[k] * corner[d];
        }
    }
    p
}

/// `int_T 1/|x - y| dy`, exact for any `x`.
pub fn potential(tri: &[Point; 3], x: &Point) -> f64 {
    let e1 = geometry::sub(&tri[1], &tri[0]);
    let e2 = geometry::sub(&tri[2], &tri[0]);
    let nn = geometry::cross(&e1, &e2);
    let n = geometry::scale(&nn, 1.0 / geometry::norm(&nn));
    let h = geometry::dot(&geometry::sub(x, &tri[0]), &n);
    let rho = geometry::sub(x, &geometry::scale(&n, h));
    let ah = h.abs();
    let size = geometry::diameter(&tri[0], &tri[1], &tri[2]);
    let eps = 1e-14 * size;
    let mut total = 0.0;
    for i in 0..3 {
        let a = &tri[i];
        let b = &tri[(i + 1) % 3];
        let edge = geometry::sub(b, a);
        let t = geometry::scale(&edge, 1.0 / geometry::norm(&edge));
        let m = geometry::cross(&t, &n);
        let ar = geometry::sub(a, &rho);
        let p0 = geometry::dot(&ar, &m);
        if p0.abs() < eps {
            continue;
        }
        let lm = geometry::dot(&ar, &t);
        let lp = geometry::dot(&geometry::sub(b, &rho), &t);
        let rm = geometry::dist(x, a);
        let rp = geometry::dist(x, b);
        let r02 = p0 * p0 + h * h;
        // R + l without cancellation for l < 0
        let f = |r: f64, l: f64| if l >= 0.0 { r + l } else { r02 / (r - l) };
        total += p0 * (f(rp, lp) / f(rm, lm)).ln();
        if ah >= eps {
            total -= ah * ((p0 * lp / (r02 + ah * rp)).atan() - (p0 * lm / (r02 + ah * rm)).atan());
        }
    }
    total
}

/// `int_T int_T 1/|x - y| dy dx` in closed form.
pub fn self_term(tri: &[Point; 3]) -> f64 {
    let a = geometry::dist(&tri[1], &tri[2]);
    let b = geometry::dist(&tri[2], &tri[0]);
    let c = geometry::dist(&tri[0], &tri[1]);
    let area = geometry::triangle_area(&tri[0], &tri[1], &tri[2]);
    let mut s = 0.0;
    for (x, y, z) in [(a, b, c), (b, c, a), (c, a, b)] {
        s += (((x + y) * (x + y) - z * z) / (y * y - (x - z) * (x - z))).ln() / x;
    }
    4.0 * area * area / 3.0 * s
}
