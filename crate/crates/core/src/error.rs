use chrono::NaiveDate;
use thiserror::Error;

use crate::model::{CourseId, MachineId, ProtocolId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("date {0} is outside the configured calendar span")]
    OutOfRange(NaiveDate),
    #[error("unknown protocol `{0}`")]
    UnknownProtocol(ProtocolId),
    #[error("unknown machine `{0}`")]
    UnknownMachine(MachineId),
    #[error("unknown course `{0}`")]
    UnknownCourse(CourseId),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("dangling reference: course `{course}` follows unknown course `{follows}`")]
    DanglingReference { course: CourseId, follows: CourseId },
    #[error("input schedule violates the capacity model: {0}")]
    InputIntegrity(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("instance exceeds the oracle size cap: {0}")]
    SizeCap(String),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(path: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
