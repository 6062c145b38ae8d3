use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension {dim} exceeds the configured cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not Hermitian (relative deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid weight matrix: {0}")]
    InvalidWeight(String),

    #[error("eigen-solver did not converge within {max_iterations} iterations")]
    EigenNonConvergence { max_iterations: usize },

    #[error("expected {expected} generators, found {found}")]
    GeneratorCount { expected: usize, found: usize },

    #[error("state has no amplitudes")]
    EmptyState,

    #[error("finite-difference step {step:.3e} underflows at parameter {param}")]
    StepUnderflow { param: usize, step: f64 },

    #[error("parameter {param} = {value} is too close to the domain boundary for central differences")]
    DomainBoundary { param: usize, value: f64 },

    #[error("probability of outcome {outcome} is {value:.3e}, below the clipping tolerance")]
    NegativeProbability { outcome: usize, value: f64 },

    #[error("probabilities sum to {sum}, not one")]
    ProbabilitySum { sum: f64 },

    #[error("every outcome lies below the probability floor")]
    AllOutcomesBelowFloor,

    #[error("matrix is identically zero")]
    ZeroMatrix,

    #[error("weight has support on directions the Fisher matrix cannot estimate")]
    Inestimable,

    #[error("bound is unbounded (zero information along the requested direction)")]
    Unbounded,

    #[error("weight matrix is singular; the full-rank analysis needs a positive-definite weight")]
    SingularWeight,

    #[error("parameters are not locally identifiable (constraint map has rank {rank}, needs {needed})")]
    NotIdentifiable { rank: usize, needed: usize },

    #[error("solver did not converge in {iterations} iterations (gap {gap:.3e})")]
    SolverNonConvergence { iterations: usize, gap: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("zero vector")]
    ZeroVector,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("log-likelihood is -inf on every grid node")]
    DegenerateLikelihood,

    #[error("observed outcome {outcome} is impossible under the current posterior support")]
    ImpossibleOutcome { outcome: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
