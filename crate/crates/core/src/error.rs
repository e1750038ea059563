use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("layer count must be at least 1")]
    ZeroLayers,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid slot pairing: {0}")]
    InvalidPairing(String),
    #[error(
        "contraction width {rank} exceeds cap {cap} when eliminating label {label} (layer {layer})"
    )]
    WidthExceeded {
        label: usize,
        layer: usize,
        rank: usize,
        cap: usize,
    },
    #[error("{what} too large: {value} > {limit}")]
    TooLarge {
        what: &'static str,
        value: usize,
        limit: usize,
    },
    #[error("symbol at position {position} does not match the channel")]
    SymbolMismatch { position: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("inconsistent erasure system")]
    Inconsistent,
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
