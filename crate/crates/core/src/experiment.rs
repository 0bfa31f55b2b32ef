//! Experiment driver: mesh families, operators, condition numbers and
//! timing, reported as CSV or JSON tables.

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin;
use crate::mesh::{cube_surface, unit_square, MeshForest};
use crate::multilevel::{self, MultiLevelOperator};
use crate::operator::{FnOperator, Identity, LinearOperator};
use crate::precond::{self, PrecondConfig, Preconditioner};
use crate::sparse::CsrMatrix;
use crate::spectral::{lanczos_condition, pcg_solve, LanczosOptions};

/// Bisection sweeps per uniform table row (each row quadruples `#T`).
pub const UNIFORM_SWEEPS_PER_ROW: usize = 2;
/// Corner marking rounds per corner-refinement table row.
pub const CORNER_ROUNDS_PER_ROW: usize = 8;
/// Uniform sweeps of the calibration mesh for `beta = auto`.
pub const CALIBRATION_SWEEPS: usize = 4;
pub const DENSE_CHECK_LIMIT: usize = 200;
pub const TIMING_REPEATS: usize = 10;
const PENCIL_INNER_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Cube,
    UnitSquare,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    Uniform,
    Corners,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    SingleLayer,
    Stiffness,
    Mass,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Beta {
    Fixed(f64),
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub geometry: Geometry,
    pub refinement: Refinement,
    /// Number of table rows.
    pub levels: usize,
    pub s: f64,
    pub beta: Beta,
    pub operator: OperatorKind,
    pub seed: u64,
    pub dense_check: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.refinement == Refinement::Corners && self.geometry != Geometry::Cube {
            return Err(Error::InvalidSpec("corner refinement requires the cube".into()));
        }
        match (self.operator, self.geometry) {
            (OperatorKind::SingleLayer, Geometry::UnitSquare) => {
                return Err(Error::InvalidSpec("single layer requires a closed surface".into()))
            }
            (OperatorKind::Stiffness | OperatorKind::Mass, Geometry::Cube) => {
                return Err(Error::InvalidSpec("stiffness and mass require the unit square".into()))
            }
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.s) {
            return Err(Error::InvalidSpec(format!("s = {} outside [0, 1]", self.s)));
        }
        if let Beta::Fixed(b) = self.beta {
            if b.is_nan() || b <= 0.0 {
                return Err(Error::InvalidSpec(format!("beta = {b} must be positive")));
            }
        }
        if self.levels == 0 {
            return Err(Error::InvalidSpec("at least one level is required".into()));
        }
        Ok(())
    }
}

/// Lanczos start seed: `OPPREC_SEED` if set and valid, otherwise 0.
pub fn seed_from_env() -> u64 {
    std::env::var("OPPREC_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub dofs: usize,
    pub h_min: f64,
    pub kappa_a: Option<f64>,
    pub kappa_ga: Option<f64>,
    pub sec_per_dof: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<Row>,
    pub beta: Option<f64>,
    /// Per row: max relative deviation of the fast operators from the dense
    /// oracles, when checked.
    pub dense_deviation: Vec<Option<f64>>,
}

pub fn initial_mesh(geometry: Geometry) -> Result<MeshForest> {
    match geometry {
        Geometry::Cube => MeshForest::from_description(&cube_surface(1.0)),
        Geometry::UnitSquare => MeshForest::from_description(&unit_square()),
    }
}

/// Marks every leaf having one of the eight cube corners as a vertex.
pub fn refine_corners(forest: &mut MeshForest) -> Result<()> {
    let marked: Vec<_> = forest
        .leaves()
        .into_iter()
        .filter(|&n| forest.node(n).vertices.iter().any(|&v| v < 8))
        .collect();
    forest.refine_conforming(&marked)?;
    Ok(())
}

pub fn advance_row(forest: &mut MeshForest, refinement: Refinement) -> Result<()> {
    match refinement {
        Refinement::Uniform => {
            for _ in 0..UNIFORM_SWEEPS_PER_ROW {
                forest.refine_uniform()?;
            }
        }
        Refinement::Corners => {
            for _ in 0..CORNER_ROUNDS_PER_ROW {
                refine_corners(forest)?;
            }
        }
    }
    Ok(())
}

/// `min_T sqrt(|T|)` over the leaves.
pub fn h_min(forest: &MeshForest) -> f64 {
    forest
        .leaves()
        .iter()
        .map(|&n| forest.node(n).area.sqrt())
        .fold(f64::INFINITY, f64::min)
}

fn median_seconds(mut f: impl FnMut()) -> f64 {
    f();
    let mut times: Vec<f64> = (0..TIMING_REPEATS)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let m = times.len() / 2;
    if times.len().is_multiple_of(2) {
        0.5 * (times[m - 1] + times[m])
    } else {
        times[m]
    }
}

fn rel_dev(fast: &DMatrix<f64>, dense: &DMatrix<f64>) -> f64 {
    (fast - dense).amax() / dense.amax()
}

/// `beta` equating the two summands of `G A` on the calibration mesh.
pub fn auto_beta(s: f64) -> Result<f64> {
    let mut f = initial_mesh(Geometry::Cube)?;
    for _ in 0..CALIBRATION_SWEEPS {
        f.refine_uniform()?;
    }
    let a = galerkin::assemble_single_layer(&f)?;
    precond::calibrate_beta(&f, s, &a)
}

fn cube_row(
    forest: &MeshForest,
    spec: &ExperimentSpec,
    beta: f64,
    opts: &LanczosOptions,
) -> Result<(Row, Option<f64>)> {
    let config = PrecondConfig { s: spec.s, beta };
    let g = Preconditioner::new(forest, config)?;
    let n = g.num_elements();
    let (kappa_a, kappa_ga) = if spec.operator == OperatorKind::SingleLayer {
        let a = galerkin::assemble_single_layer(forest)?;
        let res = lanczos_condition(&a, &g, opts)?;
        let ka = lanczos_condition(&a, &crate::operator::Identity(n), opts)?;
        (Some(ka.kappa), Some(res.kappa))
    } else {
        (None, None)
    };
    let r: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
    let sec = median_seconds(|| {
        std::hint::black_box(g.apply_g(&r).expect("sized"));
    });
    let dev = if spec.dense_check && n <= DENSE_CHECK_LIMIT {
        let dense = precond::assemble_g_dense(forest, &config)?;
        let fast = crate::operator::to_dense(&g);
        let hier = g.bs.hierarchy().clone();
        let bs_dense = multilevel::assemble_bs_dense(forest, &hier, spec.s)?;
        Some(rel_dev(&fast, &dense).max(rel_dev(&g.bs.to_dense(), &bs_dense)))
    } else {
        None
    };
    Ok((
        Row {
            dofs: n,
            h_min: h_min(forest),
            kappa_a,
            kappa_ga,
            sec_per_dof: sec / n as f64,
        },
        dev,
    ))
}

fn square_row(forest: &MeshForest, spec: &ExperimentSpec, opts: &LanczosOptions) -> Result<(Row, Option<f64>)> {
    let bs = MultiLevelOperator::from_forest(forest, spec.s)?;
    let n = bs.num_dofs();
    let (kappa_a, kappa_ga) = match spec.operator {
        OperatorKind::Stiffness | OperatorKind::Mass => {
            let k = if spec.operator == OperatorKind::Stiffness {
                galerkin::assemble_stiffness(forest)
            } else {
                galerkin::assemble_mass(forest)
            };
            let (lo, hi) = pencil_interval(&bs, &k, opts)?;
            let plain = lanczos_condition(&k, &Identity(n), opts)?;
            (Some(plain.kappa), Some(hi / lo))
        }
        _ => (None, None),
    };
    let u: Vec<f64> = (0..n).map(|i| 1.0 + (i % 5) as f64).collect();
    let sec = median_seconds(|| {
        std::hint::black_box(bs.apply_bs(&u).expect("sized"));
    });
    let dev = if spec.dense_check && forest.num_leaves() <= DENSE_CHECK_LIMIT {
        let hier = bs.hierarchy().clone();
        Some(rel_dev(
            &bs.to_dense(),
            &multilevel::assemble_bs_dense(forest, &hier, spec.s)?,
        ))
    } else {
        None
    };
    Ok((
        Row {
            dofs: n,
            h_min: h_min(forest),
            kappa_a,
            kappa_ga,
            sec_per_dof: sec / n as f64,
        },
        dev,
    ))
}

/// Extreme generalized eigenvalues of `B^S x = lambda K x`, with `K^{-1}`
/// applied by Jacobi-preconditioned CG.
pub fn pencil_interval(bs: &MultiLevelOperator, k: &CsrMatrix, opts: &LanczosOptions) -> Result<(f64, f64)> {
    let n = k.nrows();
    if n != bs.num_dofs() {
        return Err(Error::SizeMismatch {
            expected: bs.num_dofs(),
            got: n,
        });
    }
    let inv_diag: Vec<f64> = (0..n).map(|i| 1.0 / k.get(i, i)).collect();
    let jacobi = FnOperator {
        dim: n,
        f: |x: &[f64], y: &mut [f64]| {
            for ((yi, xi), d) in y.iter_mut().zip(x).zip(&inv_diag) {
                *yi = xi * d;
            }
        },
    };
    let kinv = FnOperator {
        dim: n,
        f: |x: &[f64], y: &mut [f64]| {
            let (sol, _) =
                pcg_solve(k, &jacobi, x, PENCIL_INNER_TOL, 10 * n.max(100)).expect("inner solve on an SPD matrix");
            y.copy_from_slice(&sol);
        },
    };
    let res = lanczos_condition(bs as &dyn LinearOperator, &kinv, opts)?;
    Ok((res.lambda_min, res.lambda_max))
}

/// Runs the experiment, handing each finished row to `on_row` before the
/// next level starts.
pub fn run_experiment_with(spec: &ExperimentSpec, mut on_row: impl FnMut(&Row)) -> Result<ExperimentOutput> {
    spec.validate()?;
    let opts = LanczosOptions {
        seed: spec.seed,
        ..LanczosOptions::default()
    };
    let mut out = ExperimentOutput::default();
    let beta = match (spec.geometry, spec.beta) {
        (Geometry::Cube, Beta::Fixed(b)) => Some(b),
        (Geometry::Cube, Beta::Auto) => Some(auto_beta(spec.s)?),
        (Geometry::UnitSquare, _) => None,
    };
    out.beta = beta;
    let mut forest = initial_mesh(spec.geometry)?;
    for level in 0..spec.levels {
        if level > 0 {
            advance_row(&mut forest, spec.refinement)?;
        }
        let (row, dev) = match spec.geometry {
            Geometry::Cube => cube_row(&forest, spec, beta.expect("cube has beta"), &opts)?,
            Geometry::UnitSquare => square_row(&forest, spec, &opts)?,
        };
        on_row(&row);
        out.rows.push(row);
        out.dense_deviation.push(dev);
    }
    Ok(out)
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    run_experiment_with(spec, |_| {})
}

/// Six significant digits, `%g` style.
pub fn format_number(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa.to_string()), sign, exp.abs())
    } else {
        trim(format!("{:.*}", (5 - exp).max(0) as usize, x))
    }
}

pub const CSV_HEADER: &str = "dofs,h_min,kappa_a,kappa_ga,sec_per_dof";

pub fn rows_to_csv(rows: &[Row]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.dofs,
            format_number(r.h_min),
            opt(r.kappa_a),
            opt(r.kappa_ga),
            format_number(r.sec_per_dof)
        ));
    }
    s
}

fn round6(x: f64) -> f64 {
    format_number(x).parse().unwrap_or(x)
}

pub fn rows_to_json(rows: &[Row]) -> Result<String> {
    let rounded: Vec<Row> = rows
        .iter()
        .map(|r| Row {
            dofs: r.dofs,
            h_min: round6(r.h_min),
            kappa_a: r.kappa_a.map(round6),
            kappa_ga: r.kappa_ga.map(round6),
            sec_per_dof: round6(r.sec_per_dof),
        })
        .collect();
    Ok(serde_json::to_string_pretty(&rounded)?)
}

pub fn emit_report(rows: &[Row], format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => rows_to_csv(rows),
        Format::Json => rows_to_json(rows)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}
