use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: probability {value} outside [0, 1]")]
    Probability { line: usize, value: f64 },

    #[error("line {line}: duplicate edge ({u}, {v})")]
    DuplicateEdge { line: usize, u: usize, v: usize },

    #[error("node {node} out of range for network with {node_count} nodes")]
    InvalidNode { node: usize, node_count: usize },

    #[error("network is disconnected; diameter is undefined")]
    Disconnected,

    #[error("neighborhood radius {radius} exceeds the configured cap {cap}")]
    RadiusTooLarge { radius: usize, cap: usize },

    #[error("exact enumeration over {edges} free edges exceeds the cap of {cap}")]
    EnumerationCap { edges: usize, cap: usize },

    #[error("Newman-Ziff sampling needs a uniform edge probability, found {first} and {other}")]
    HeterogeneousProbability { first: f64, other: f64 },

    #[error("horizon {horizon} is shorter than the longest neighborhood path {required}")]
    HorizonTooShort { horizon: usize, required: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid usage: {0}")]
    Usage(String),

    #[error("statistic undefined: {0}")]
    Undefined(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input data rather than a bad configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Probability { .. }
                | Error::DuplicateEdge { .. }
                | Error::Disconnected
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
