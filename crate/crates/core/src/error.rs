use std::fmt;

/// Which reward component failed while scoring a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Simplicity,
    Fluency,
    Accuracy,
    Keywords,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::Simplicity => "simplicity",
            Component::Fluency => "fluency",
            Component::Accuracy => "accuracy",
            Component::Keywords => "keywords",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no token of {0:?} is in the embedding vocabulary")]
    OutOfVocabulary(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{component} reward failed: {source}")]
    Component {
        component: Component,
        #[source]
        source: Box<Error>,
    },

    #[error("training failed at epoch {epoch}, step {step}: {message}")]
    Training {
        epoch: usize,
        step: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn in_component(self, component: Component) -> Self {
        Error::Component {
            component,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
