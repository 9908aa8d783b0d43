use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystems(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),

    #[error("term outside scenario: {0}")]
    OutOfScenario(String),

    #[error("invalid functional: {0}")]
    InvalidFunctional(String),

    #[error("size guard exceeded: {what} = {size} > {limit}")]
    GuardExceeded {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("angle out of range: {0}")]
    InvalidTheta(f64),

    #[error("invalid input triple {0:?}: exactly one input must equal 2")]
    InvalidDispatch([usize; 3]),

    #[error("no violation: {0}")]
    NoViolation(String),

    #[error("inconsistent trial record: {0}")]
    InconsistentRecord(String),

    #[error("missing correlator for triple {0:?}")]
    MissingTriple([usize; 3]),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
