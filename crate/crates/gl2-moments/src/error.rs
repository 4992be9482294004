use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("coefficient range exhausted: need A(m) up to {needed}, provider stops at {available}")]
    CoefficientRange { needed: u64, available: u64 },
    #[error("extrapolation ladder too short: {0} points, need at least 3")]
    LadderTooShort(usize),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invariant violation at m={m}: {msg}")]
    Invariant { m: u64, msg: String },
    #[error("precision: {0}")]
    Precision(String),
    #[error("vanishing coefficient A({m}) in a denominator (Lehmer case)")]
    Lehmer { m: u64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("truncation: {0}")]
    Truncation(String),
    #[error("too few usable points: {have} (need {need})")]
    TooFewPoints { have: usize, need: usize },
    #[error("insufficient coverage: {0}")]
    Coverage(String),
    #[error("no witness found in [{lo}, {hi}]")]
    NoWitness { lo: u64, hi: u64 },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
