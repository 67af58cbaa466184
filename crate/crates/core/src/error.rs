use thiserror::Error;

use crate::envs::ScenarioKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("{0}: input is empty")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("episode already finished after {0} steps")]
    EpisodeFinished(usize),

    #[error("{builder} requires a {expected} world, got {actual}")]
    WrongScenario {
        builder: &'static str,
        expected: ScenarioKind,
        actual: ScenarioKind,
    },

    #[error("replay buffer holds {available} transitions, {requested} requested")]
    InsufficientSamples { available: usize, requested: usize },

    #[error("replay index {0} does not refer to a stored transition")]
    InvalidIndex(usize),

    #[error("replay index {0} is stale: the slot was overwritten after sampling")]
    StaleIndex(usize),

    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
}

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
