use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("cannot parse rational from {0:?}")]
    ParseRational(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("invalid CPWL function: {0}")]
    InvalidCpwl(String),
    #[error("box [{lower}, {upper}] is outside the domain [{domain_lower}, {domain_upper}]")]
    OutsideDomain {
        lower: String,
        upper: String,
        domain_lower: String,
        domain_upper: String,
    },
    #[error("network must be univariate, got input_dim = {0}")]
    NotUnivariate(usize),
    #[error("hull x-spans differ: [{0}] vs [{1}]")]
    SpanMismatch(String, String),
    #[error("function class requirement not met: {0}")]
    ClassMismatch(String),
    #[error("unsatisfiable class request: {0}")]
    Unsatisfiable(String),
    #[error("network is not a single hidden ReLU layer: {0}")]
    NotSingleLayer(String),
    #[error("neuron n{neuron} is unstable but does not switch on the kink hyperplane")]
    KinkMismatch { neuron: usize },
    #[error("invalid kink hyperplane: {0}")]
    InvalidKink(String),
    #[error("activation pattern budget exceeded: {unstable} unstable ReLUs (cap {cap})")]
    BudgetExceeded { unstable: usize, cap: usize },
    #[error("network does not encode the reference: {0}")]
    EncodingMismatch(String),
    #[error("linear program unexpectedly {0}")]
    LpDefect(&'static str),
    #[error("unknown relaxation {0:?}")]
    UnknownRelaxation(String),
    #[error("malformed JSON: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
