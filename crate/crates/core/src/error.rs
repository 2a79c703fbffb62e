use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {element}: {rule}")]
    Config {
        file: String,
        element: String,
        rule: String,
    },
    #[error("{path}: malformed XML: {source}")]
    Xml {
        path: PathBuf,
        #[source]
        source: roxmltree::Error,
    },
    #[error("{path}: csv: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("agent {agent}: missing model state at {path}")]
    MissingModel { agent: String, path: PathBuf },
    #[error("agent {agent}: corrupt model state at {path}: {reason}")]
    CorruptModel {
        agent: String,
        path: PathBuf,
        reason: String,
    },
    #[error("evaluation needs trained models; missing for agents: {}", .0.join(", "))]
    MissingModels(Vec<String>),
    #[error("graph: {0}")]
    Graph(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("log inconsistency: {0}")]
    Logs(String),
    #[error("scenario {scenario}: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(
        file: impl Into<String>,
        element: impl Into<String>,
        rule: impl Into<String>,
    ) -> Self {
        Error::Config {
            file: file.into(),
            element: element.into(),
            rule: rule.into(),
        }
    }
}
