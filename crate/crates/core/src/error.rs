use thiserror::Error;

use crate::critical::Side;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// |Ψ|² fell below the node floor; the Bohmian velocity is undefined here.
    #[error("point ({x}, {y}) at t = {t} is on a nodal point")]
    AtNode { x: f64, y: f64, t: f64 },

    /// Nodal points are effectively at infinity (t close to an escape time).
    #[error("t = {t} is within the escape guard; nodal points are at infinity")]
    NearEscape { t: f64 },

    #[error("no X-point converged on the {0} side")]
    NoConvergence(Side),

    #[error("degenerate fixed point (|det J| = {det:e})")]
    Degenerate { det: f64 },

    #[error("fixed point is not a saddle")]
    NotSaddle,

    #[error("integration stalled at a node at t = {t}")]
    Stalled { t: f64 },

    #[error("deviation vector became singular at t = {t}")]
    JacobianSingular { t: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("colorplot grids differ in region or bin size")]
    GridMismatch,

    #[error("parse error on line {line} ({key}): {message}")]
    Parse {
        line: usize,
        key: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
