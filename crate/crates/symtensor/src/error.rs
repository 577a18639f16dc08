use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("invalid leg: {0}")]
    InvalidLeg(String),

    #[error("leg {a_leg} of the first tensor does not pair with leg {b_leg} of the second: {reason}")]
    LegMismatch {
        a_leg: usize,
        b_leg: usize,
        reason: String,
    },

    #[error("block {key:?} violates the charge selection rule (total charge {total})")]
    ChargeViolation { key: Vec<i32>, total: i32 },

    #[error("block {key:?} holds {got} entries, the leg structure requires {expected}")]
    BlockShape {
        key: Vec<i32>,
        expected: usize,
        got: usize,
    },

    #[error("structure mismatch: {0}")]
    Structure(String),

    #[error("cannot factor zero tensor")]
    ZeroTensor,

    #[error("dense linear algebra failed: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed tensor stream: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;
