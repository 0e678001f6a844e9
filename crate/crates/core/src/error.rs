use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("symbol {0} is outside the quaternary alphabet")]
    InvalidSymbol(u8),

    #[error("illegal nucleotide character {0:?}")]
    InvalidBase(char),

    #[error("position {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),

    #[error("invalid code specification: {0}")]
    InvalidCode(String),

    #[error("payload of {len} bits is not a multiple of the puncturing period {period}")]
    PayloadLength { len: usize, period: usize },

    #[error("no reads")]
    NoReads,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },

    #[error("read references unknown id {0:?}")]
    UnknownRefId(String),

    #[error("final drift {drift} outside the window [{d_min}, {d_max}]")]
    WindowViolation { drift: i64, d_min: i32, d_max: i32 },

    #[error("received sequence has zero probability under the decoder model")]
    ZeroLikelihood,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("prior probability must be strictly positive")]
    ZeroPrior,

    #[error("instance too large for exhaustive enumeration: {0}")]
    OracleTooLarge(String),

    #[error("unsupported read count {0}; designs exist for M in {{1, 2, 5}}")]
    UnsupportedReads(usize),

    #[error("lift factor {z} too small: {reason}")]
    LiftTooSmall { z: usize, reason: String },

    #[error("parity-check matrix is rank deficient: rank {rank} of {rows} rows")]
    RankDeficient { rows: usize, rank: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
