use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("story `{story_id}` has no name for attribute `{attr_id}`")]
    Coverage { story_id: String, attr_id: String },

    #[error("no constraint-satisfying sample after {attempts} attempts")]
    RejectionExhausted { attempts: usize },

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("agent `{agent}` protocol error: {reason}")]
    AgentProtocol { agent: String, reason: String },

    #[error("agent `{agent}` requested a tool with no budget left")]
    BudgetViolation { agent: String },

    #[error("template error: {0}")]
    Template(String),

    #[error("attribute `{0}` claimed more than once")]
    DuplicateClaim(String),

    #[error("value {value} for `{attr_id}` is outside the attribute domain")]
    OutOfDomainValue { attr_id: String, value: i64 },

    #[error("{count} claims exceed the limit of {max}")]
    TooManyClaims { count: usize, max: usize },

    #[error("no tool configured for `{0}`")]
    UnknownTool(String),

    #[error("estimate is missing attribute `{0}`")]
    IncompleteEstimate(String),

    #[error("cogency judge unavailable: {0}")]
    JudgeUnavailable(String),

    #[error("{episodes} episodes cannot be split evenly over {variants} variants")]
    Divisibility { episodes: usize, variants: usize },

    #[error("no successful episodes for ({sender}, {receiver})")]
    EmptyCell { sender: String, receiver: String },

    #[error("comparison graph is not connected")]
    NotConnected,

    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),

    #[error("empty episode sample")]
    EmptySample,

    #[error("playbook is for `{playbook}` but the prompt targets `{prompt}`")]
    EnvMismatch { playbook: String, prompt: String },

    #[error("remote transport error: {0}")]
    Transport(String),

    #[error("remote service returned status {0}")]
    Service(u16),

    #[error("remote call timed out")]
    Timeout,

    #[error("trace sink: {0}")]
    Sink(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
