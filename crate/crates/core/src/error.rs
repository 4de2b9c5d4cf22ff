use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Two objects that must live in the same space do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("basis is not orthonormal: |<{i}|{j}>| = {overlap}")]
    NotOrthonormal { i: usize, j: usize, overlap: f64 },

    #[error("port {port} out of range for {ports} ports")]
    InvalidPort { port: usize, ports: usize },

    #[error("beam splitter ports must differ (both are {0})")]
    SamePort(usize),

    #[error("state is empty")]
    EmptyState,

    #[error("photons found outside port {0}")]
    PhotonsOutsidePort(usize),

    #[error("input state is not an element of the basis")]
    NotInBasis,

    #[error("invalid cloning parameters: {0}")]
    InvalidCloningSpec(String),

    #[error("cascade needs M = {m} photons but the cap is {cap}; raise the cap to proceed")]
    CascadeTooLarge { m: usize, cap: usize },

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("all coincidence counts are zero")]
    NoCounts,

    #[error("unknown basis {0:?}")]
    UnknownBasis(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
