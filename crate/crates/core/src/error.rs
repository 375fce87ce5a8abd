use alloc::string::String;

/// Errors produced by the trek-rule toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("variable names must be nonempty")]
    EmptyName,
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("graph contains a directed cycle through `{0}`")]
    Cycle(String),
    #[error("coefficient on {parent} -> {child} must be finite and nonzero, got {value}")]
    InvalidCoefficient {
        parent: String,
        child: String,
        value: f64,
    },
    #[error("edge {0} -> {1} has no coefficient")]
    MissingCoefficient(String, String),
    #[error("coefficient given for {0} -> {1}, which is not an edge")]
    StrayCoefficient(String, String),
    #[error("standardization infeasible at `{node}`: disturbance variance {variance:e} is below 1e-9")]
    StandardizationInfeasible { node: String, variance: f64 },
    #[error("graphs do not share a node set")]
    NodeSetMismatch,
    #[error("query needs two distinct variables, got `{0}` twice")]
    SameVariable(String),
    #[error("`{0}` is both an endpoint and in the conditioning set")]
    EndpointConditioned(String),
    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),
    #[error("column `{0}` has zero variance")]
    DegenerateColumn(String),
    #[error("table needs at least {min} rows, got {got}")]
    TooFewRows { min: usize, got: usize },
    #[error("conditioning set is numerically singular (condition number {0:e})")]
    SingularConditioning(f64),
    #[error("sample size {n} is too small to condition on {given} variables")]
    InsufficientSample { n: u64, given: usize },
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("expected exactly 3 variables, got {0}")]
    ArityMismatch(usize),
    #[error("duplicate marginal id `{0}`")]
    DuplicateId(String),
    #[error("marginal `{id}`: {detail}")]
    VariableMismatch { id: String, detail: String },
    #[error("contradictory verdicts for {0}")]
    ContradictoryStatements(String),
    #[error("correlation of ({0}, {1}) is unknown")]
    UnknownPair(String, String),
    #[error("correlation of ({0}, {1}) is zero")]
    ZeroCorrelation(String, String),
    #[error("marginals disagree on ({a}, {b}): {first} vs {second}")]
    InconsistentOverlap {
        a: String,
        b: String,
        first: f64,
        second: f64,
    },
    #[error("{got} variables exceed the exhaustive search limit of {limit}")]
    TooManyVariables { got: usize, limit: usize },
    #[error("edge {0} -- {1} is not oriented")]
    UndirectedEdge(String, String),
    #[error("no marginal datasets supplied")]
    NoMarginals,
    #[error("unexpected structure: {0}")]
    Structure(String),
}

pub type Result<T> = core::result::Result<T, Error>;
