use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} is not a square matrix")]
    NotSquare(&'static str),
    #[error("symplectic structure must have even positive dimension, got {0}")]
    OddDimension(usize),
    #[error("structure matrix is degenerate (smallest singular value {sigma_min:e})")]
    DegenerateStructure { sigma_min: f64 },
    #[error("both forms of the pair are zero")]
    ZeroPair,
    #[error("pencil element at theta = {theta} vanishes")]
    ZeroElement { theta: f64 },
    #[error("forms are linearly dependent")]
    DependentPair,
    #[error("pair is dissipative: cos({theta})A + sin({theta})B is positive semidefinite")]
    Dissipative { theta: f64 },
    #[error("numerically inconclusive after {iterations} iterations")]
    NumericalInconclusive { iterations: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("starting point must be nonzero")]
    ZeroStart,
    #[error("linear map has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("J = T J_2n T^t is degenerate (smallest singular value {sigma_min:e})")]
    DegenerateJ { sigma_min: f64 },
    #[error("no non-degenerate combination of the bracket matrices found within {budget} trials")]
    NondegenerateMuNotFound { budget: usize },
    #[error(
        "grading violation: [e_{i}, e_{j}] has a component on e_{k} in layer {layer}, expected layer >= {min_layer}"
    )]
    GradingViolation {
        i: usize,
        j: usize,
        k: usize,
        layer: usize,
        min_layer: usize,
    },
    #[error("structure constants are not antisymmetric at ({i}, {j}, {k})")]
    AntisymmetryViolation { i: usize, j: usize, k: usize },
    #[error("Jacobi identity residual {residual:e} exceeds tolerance")]
    JacobiViolation { residual: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
