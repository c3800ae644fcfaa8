use thiserror::Error;

/// Errors raised by waveform synthesis, codebook design and the receivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set violates an invariant of the configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Two inputs that must agree in length do not.
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// The requested codebook size exceeds the counting bound for the
    /// given alphabet, code length and deviation.
    #[error("codebook size {requested} exceeds the feasibility bound {bound}")]
    CodebookTooLarge { requested: usize, bound: String },

    /// Coordinate descent ended with codewords above the mismatch threshold.
    #[error("codebook design infeasible after {sweeps} sweeps: codewords {indices:?} exceed eps")]
    Infeasible { sweeps: usize, indices: Vec<usize> },

    /// A channel estimate was used past the chirp index it is valid for.
    #[error("stale channel estimate: valid until chirp {valid_until}, requested {requested}")]
    StaleEstimate { valid_until: usize, requested: usize },

    /// Codebook text could not be parsed.
    #[error("codebook parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
