use symtensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("capacity exceeded: requested {requested}, limit is {limit}")]
    Capacity { requested: String, limit: String },
    #[error("no signal: {0}")]
    NoSignal(String),
    #[error("{what} did not converge (last metric {metric:.3e})")]
    Convergence { what: String, metric: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("store: {0}")]
    Store(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
