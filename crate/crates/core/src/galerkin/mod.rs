//! Test operators: the Laplace single layer on closed triangulated surfaces
//! (piecewise constants) and P1 mass/stiffness matrices on planar meshes.

pub mod fem;
pub mod quadrature;

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::mesh::{MeshForest, VertexId};

pub use fem::{assemble_mass, assemble_stiffness};

#[derive(Clone, Copy, Debug)]
pub struct QuadratureConfig {
    /// Pairs with centroid distance below `near_ratio` times the larger diameter
    /// (or sharing a vertex) use the semi-analytic rule.
    pub near_ratio: f64,
    /// Above this ratio the cheapest far-field rule is used.
    pub far_ratio: f64,
    pub far_order_near: usize,
    pub far_order_far: usize,
    /// Subdivision stops once the sub-triangle is `eta` diameters away.
    pub eta: f64,
    pub max_depth: usize,
    pub leaf_order: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            near_ratio: 3.0,
            far_ratio: 8.0,
            far_order_near: 3,
            far_order_far: 2,
            eta: 1.0,
            max_depth: 7,
            leaf_order: 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Panel {
    pub corners: [Point; 3],
    pub vertices: [VertexId; 3],
    pub area: f64,
    pub diam: f64,
    pub centroid: Point,
}

impl Panel {
    pub fn new(corners: [Point; 3], vertices: [VertexId; 3]) -> Self {
        Panel {
            area: geometry::triangle_area(&corners[0], &corners[1], &corners[2]),
            diam: geometry::diameter(&corners[0], &corners[1], &corners[2]),
            centroid: geometry::centroid(&corners),
            corners,
            vertices,
        }
    }

    fn touches(&self, other: &Panel) -> bool {
        self.vertices.iter().any(|v| other.vertices.contains(v))
    }
}

pub fn leaf_panels(forest: &MeshForest) -> Vec<Panel> {
    forest
        .leaves()
        .into_iter()
        .map(|n| Panel::new(forest.corner_points(n), forest.node(n).vertices))
        .collect()
}

fn subdivide(t: &[Point; 3]) -> [[Point; 3]; 4] {
    let m01 = geometry::midpoint(&t[0], &t[1]);
    let m12 = geometry::midpoint(&t[1], &t[2]);
    let m20 = geometry::midpoint(&t[2], &t[0]);
    [[t[0], m01, m20], [m01, t[1], m12], [m20, m12, t[2]], [m01, m12, m20]]
}

struct Rules {
    leaf: Vec<([f64; 3], f64)>,
    near: Vec<([f64; 3], f64)>,
    far: Vec<([f64; 3], f64)>,
}

fn outer_adaptive(sub: &[Point; 3], inner: &[Point; 3], depth: usize, cfg: &QuadratureConfig, rules: &Rules) -> f64 {
    let c = geometry::centroid(sub);
    let diam = geometry::diameter(&sub[0], &sub[1], &sub[2]);
    let r = sub.iter().map(|p| geometry::dist(p, &c)).fold(0.0, f64::max);
    let gap = geometry::point_triangle_distance(inner, &c) - r;
    if depth >= cfg.max_depth || gap >= cfg.eta * diam {
        let area = geometry::triangle_area(&sub[0], &sub[1], &sub[2]);
        let sum: f64 = rules
            .leaf
            .iter()
            .map(|(b, w)| w * quadrature::potential(inner, &quadrature::map_point(sub, b)))
            .sum();
        return area * sum;
    }
    subdivide(sub)
        .iter()
        .map(|s| outer_adaptive(s, inner, depth + 1, cfg, rules))
        .sum()
}

fn tensor_gauss(p: &Panel, q: &Panel, rule: &[([f64; 3], f64)]) -> f64 {
    let xs: Vec<Point> = rule.iter().map(|(b, _)| quadrature::map_point(&p.corners, b)).collect();
    let ys: Vec<Point> = rule.iter().map(|(b, _)| quadrature::map_point(&q.corners, b)).collect();
    let mut sum = 0.0;
    for (x, (_, wx)) in xs.iter().zip(rule) {
        for (y, (_, wy)) in ys.iter().zip(rule) {
            sum += wx * wy / geometry::dist(x, y);
        }
    }
    p.area * q.area * sum
}

fn pair_integral(p: &Panel, q: &Panel, same: bool, cfg: &QuadratureConfig, rules: &Rules) -> f64 {
    if same {
        return quadrature::self_term(&p.corners);
    }
    let ratio = geometry::dist(&p.centroid, &q.centroid) / p.diam.max(q.diam);
    if p.touches(q) || ratio < cfg.near_ratio {
        let key = |t: &Panel| (t.area, t.centroid);
        let (outer, inner) = if key(p) <= key(q) { (p, q) } else { (q, p) };
        outer_adaptive(&outer.corners, &inner.corners, 0, cfg, rules)
    } else if ratio < cfg.far_ratio {
        tensor_gauss(p, q, &rules.near)
    } else {
        tensor_gauss(p, q, &rules.far)
    }
}

/// `int_P int_Q 1/|x - y|` for two panels (without the `1/4pi` factor).
pub fn panel_pair_integral(p: &Panel, q: &Panel, cfg: &QuadratureConfig) -> f64 {
    let rules = Rules {
        leaf: quadrature::triangle_rule(cfg.leaf_order),
        near: quadrature::triangle_rule(cfg.far_order_near),
        far: quadrature::triangle_rule(cfg.far_order_far),
    };
    pair_integral(p, q, std::ptr::eq(p, q), cfg, &rules)
}

/// Single layer matrix `(1/4pi) int_T int_T' 1/|x - y|` for the piecewise
/// constants on the leaves of a closed surface, in ascending leaf order.
pub fn assemble_single_layer(forest: &MeshForest) -> Result<DMatrix<f64>> {
    assemble_single_layer_with(forest, &QuadratureConfig::default())
}

pub fn assemble_single_layer_with(forest: &MeshForest, cfg: &QuadratureConfig) -> Result<DMatrix<f64>> {
    if let Some(e) = forest.boundary_edges().first() {
        return Err(Error::OpenSurface(e.0, e.1));
    }
    let panels = leaf_panels(forest);
    single_layer_from_panels(&panels, cfg)
}

pub fn single_layer_from_panels(panels: &[Panel], cfg: &QuadratureConfig) -> Result<DMatrix<f64>> {
    let rules = Rules {
        leaf: quadrature::triangle_rule(cfg.leaf_order),
        near: quadrature::triangle_rule(cfg.far_order_near),
        far: quadrature::triangle_rule(cfg.far_order_far),
    };
    let n = panels.len();
    let scale = 0.25 / std::f64::consts::PI;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| scale * pair_integral(&panels[i], &panels[j], i == j, cfg, &rules))
                .collect()
        })
        .collect();
    let mut a = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::QuadratureBreakdown(i, i + k));
            }
            a[(i, i + k)] = v;
            a[(i + k, i)] = v;
        }
    }
    Ok(a)
}

/// Writes `rows cols` on the first line, then one row per line.
pub fn dump_matrix<W: Write>(m: &DMatrix<f64>, mut w: W) -> Result<()> {
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for r in 0..m.nrows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}
