use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate triangle {0} (repeated vertex or zero area)")]
    DegenerateTriangle(usize),
    #[error("non-conforming initial mesh: {0}")]
    NonConforming(String),
    #[error("refinement edges violate the matching condition on edge ({0}, {1})")]
    MatchingViolation(usize, usize),
    #[error("gamma edge ({0}, {1}) is not an edge of the initial mesh")]
    UnknownGammaEdge(usize, usize),
    #[error("node {0} is not a leaf")]
    NotALeaf(usize),
    #[error("conforming closure exceeded depth {0}")]
    ClosureDepthExceeded(usize),
    #[error("vector length {got} does not match expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("level {got} does not match expected level {expected}")]
    LevelMismatch { expected: usize, got: usize },
    #[error("mesh has {0} elements, too large for dense assembly (limit {1})")]
    MeshTooLarge(usize, usize),
    #[error("surface is open: edge ({0}, {1}) has a single incident panel")]
    OpenSurface(usize, usize),
    #[error("quadrature produced a non-finite entry at ({0}, {1})")]
    QuadratureBreakdown(usize, usize),
    #[error("operator has zero spectral radius")]
    SingularOperand,
    #[error("iteration did not converge within {0} steps")]
    NotConverged(usize),
    #[error("non-positive A-inner product ({0:e}); operator is not SPD")]
    InnerProductBreakdown(f64),
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("mesh parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
