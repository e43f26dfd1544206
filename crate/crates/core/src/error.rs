use std::collections::BTreeSet;

use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("continued fraction depth {requested} exceeds the {available} available terms")]
    DepthUnavailable { requested: usize, available: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("value {0} is outside [0, 1)")]
    OutOfUnitInterval(f64),

    #[error("point {point} is not in the domain of system `{system}`")]
    DomainViolation { system: String, point: String },

    #[error("metric `{metric}` cannot compare points of spaces {left} and {right}")]
    SpaceMismatch {
        metric: String,
        left: String,
        right: String,
    },

    #[error("invalid radius schedule: {0}")]
    InvalidSchedule(String),

    #[error("grid of 2^{cells_log2} cells exceeds the cap of 2^{cap_log2}")]
    GridTooLarge { cells_log2: u32, cap_log2: u32 },

    #[error("orbit of {requested} points exceeds the storage cap of {cap} points")]
    OrbitTooLarge { requested: usize, cap: usize },

    #[error("{needed} uncensored scales required, found {found} (censored: {censored:?})")]
    TooFewScales {
        needed: usize,
        found: usize,
        censored: BTreeSet<u32>,
    },

    #[error("target lies outside the empirical support at every scale")]
    OutsideSupport,

    #[error("cover bound diverges: d = {d} must exceed h + epsilon = {h_eps}")]
    DivergentCover { d: f64, h_eps: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("orbit cache: {0}")]
    Cache(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
