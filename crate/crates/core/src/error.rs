use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: String, reason: String },

    #[error("component index {index} out of range (m = {m})")]
    IndexOutOfRange { index: usize, m: usize },

    #[error("dimension mismatch for `{arg}`: expected {expected}, found {found}")]
    DimensionMismatch {
        arg: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in `{arg}`")]
    NonFinite { arg: String },

    #[error("point {point:?} lies outside the domain box")]
    OutsideDomain { point: Vec<f64> },

    #[error("operator `{operator}` declares no structural form")]
    MissingStructuralForm { operator: String },

    #[error(
        "scheme is not of positive type for component {component} at node {node}: {reason}; \
         try at least {suggested_nodes} nodes per axis"
    )]
    Positivity {
        component: usize,
        node: usize,
        reason: String,
        suggested_nodes: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("boundary value {found} at node {node} differs from the Dirichlet datum {datum}")]
    BoundaryMismatch { node: usize, found: f64, datum: f64 },

    #[error("family of grid functions is empty")]
    EmptyFamily,

    #[error("input `{arg}` expected to be {expected}, classified as {verdict}")]
    Misclassified {
        arg: String,
        expected: String,
        verdict: String,
        classification: Box<crate::viscosity::Classification>,
    },

    #[error("policy iteration did not terminate within {iterations} policies")]
    PolicyIteration {
        iterations: usize,
        last_two: Box<(Vec<bool>, Vec<bool>)>,
    },

    #[error("linear solve did not reach the residual target; history {history:?}")]
    LinearSolve { history: Vec<f64> },

    #[error("barrier verification failed: {}", .details.join("; "))]
    BarrierVerification { details: Vec<String> },

    #[error(
        "nodal equation for component {component} at node {node} has no root in the sandwich \
         interval [{lower}, {upper}]; run the structural checks"
    )]
    NodalUnsolvable {
        node: usize,
        component: usize,
        lower: f64,
        upper: f64,
    },

    #[error("pseudo-time step {step} exceeds the stability bound {bound}")]
    StepTooLarge { step: f64, bound: f64 },

    #[error("pseudo-time iteration diverged; residual history {history:?}")]
    Divergence { history: Vec<f64> },

    #[error("operator `{operator}` is not supported here: {reason}")]
    UnsupportedOperator { operator: String, reason: String },

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("config parse error at line {line}, column {column} (path `{path}`): {message}")]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
