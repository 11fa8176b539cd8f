use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QheError {
    #[error("resource limit: requested {requested} qubits, cap is {cap}")]
    Resource { requested: usize, cap: usize },

    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("key mismatch: expected key index {expected}, found {found}")]
    KeyMismatch { expected: usize, found: usize },

    #[error("unsupported operation: {0}")]
    UnsupportedOperation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed branching program: {0}")]
    MalformedProgram(String),

    #[error("malformed garden-hose protocol: {0}")]
    MalformedProtocol(String),

    #[error("malformed gadget: {0}")]
    MalformedGadget(String),

    #[error("out of gadgets: need {need}, have {have}")]
    OutOfGadgets { need: usize, have: usize },

    #[error("ciphertext not finalized: key index {current}, decryption needs {required}")]
    NotFinalized { current: usize, required: usize },

    #[error("value {value} outside ring Z_{modulus}")]
    RingRange { value: u64, modulus: u64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("document error: {0}")]
    Document(String),
}

impl QheError {
    /// True for errors that come from the protocol domain rather than from
    /// malformed input text or files.
    pub fn is_domain(&self) -> bool {
        !matches!(self, QheError::Parse { .. } | QheError::Document(_))
    }
}

pub type Result<T> = std::result::Result<T, QheError>;
