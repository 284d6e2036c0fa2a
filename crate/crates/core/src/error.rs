use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("model error: {0}")]
    Model(String),

    /// An Euler state left the admissible set (positive density and internal energy).
    #[error("invalid state{}: rho = {rho}, internal energy = {internal_energy}", fmt_index(*.index))]
    InvalidState {
        index: Option<usize>,
        rho: f64,
        internal_energy: f64,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("non-finite value produced in layer {layer}")]
    NumericalOverflow { layer: usize },

    #[error("loss evaluation failed at grid index {index}: {source}")]
    Loss {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training failed at step {step}, iteration {iteration}: {source}")]
    Training {
        step: usize,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

fn fmt_index(index: Option<usize>) -> String {
    index.map(|i| format!(" at index {i}")).unwrap_or_default()
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a grid index to a state-validity error that was raised without one.
    pub(crate) fn at_index(self, i: usize) -> Self {
        match self {
            Error::InvalidState {
                index: None,
                rho,
                internal_energy,
            } => Error::InvalidState {
                index: Some(i),
                rho,
                internal_energy,
            },
            other => other,
        }
    }
}
