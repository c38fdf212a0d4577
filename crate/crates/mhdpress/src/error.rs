use thiserror::Error;

/// Errors produced by mesh handling, assembly and the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("degenerate element: {0}")]
    DegenerateElement(String),
    #[error("non-manifold boundary: {0}")]
    NonManifoldBoundary(String),
    #[error("no boundary component's bounding box strictly contains all others")]
    AmbiguousOuterComponent,
    #[error("unsupported polynomial/quadrature degree {0}")]
    UnsupportedDegree(usize),
    #[error("{what} did not converge (residual {residual:.3e}, budget {iterations})")]
    NotConverged {
        what: String,
        residual: f64,
        iterations: usize,
    },
    #[error("matrix is not positive definite")]
    IndefiniteMatrix,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("constraint block is rank deficient")]
    RankDeficientConstraints,
    #[error("operands live on different meshes")]
    MeshMismatch,
    #[error("unsupported norm: {0}")]
    UnsupportedNorm(String),
    #[error("solve failure: {0}")]
    SolveFailure(String),
    #[error(
        "flux multiplier c_{index} = {multiplier:.6e} disagrees with quadrature formula {formula:.6e}"
    )]
    ConstantsMismatch {
        index: usize,
        multiplier: f64,
        formula: f64,
    },
    #[error("data fails kernel compatibility; pairings {pairings:?}")]
    IncompatibleData { pairings: Vec<f64> },
    #[error("singular Gram matrix for the harmonic basis")]
    SingularGram,
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
