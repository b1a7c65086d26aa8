use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("delimited input error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("relation `{0}` is empty")]
    EmptyRelation(String),

    #[error("cannot draw {requested} items from a population of {available}")]
    Capacity { requested: u64, available: u64 },

    #[error("all sampling weights are zero")]
    DegenerateWeights,

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("sampling rate must lie in (0, 1], got {0}")]
    InvalidRate(f64),

    #[error("invalid allocation plan: {0}")]
    InvalidPlan(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("exhaustive search would visit {candidates} candidates, cap is {cap}")]
    SearchTooLarge { candidates: u128, cap: u128 },

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("test is underpowered: {0}")]
    Underpowered(String),

    #[error("invalid generator spec: {0}")]
    Spec(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Stable machine-readable identifier used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Schema(_) => "schema",
            Error::EmptyRelation(_) => "empty_relation",
            Error::Capacity { .. } => "capacity",
            Error::DegenerateWeights => "degenerate_weights",
            Error::Constraint(_) => "constraint",
            Error::InvalidRate(_) => "invalid_rate",
            Error::InvalidPlan(_) => "invalid_plan",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::SearchTooLarge { .. } => "search_too_large",
            Error::InstanceTooLarge(_) => "instance_too_large",
            Error::Underpowered(_) => "underpowered",
            Error::Spec(_) => "spec",
            Error::Config(_) => "config",
        }
    }
}
