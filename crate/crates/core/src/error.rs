use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty pattern")]
    EmptyPattern,

    #[error(
        "bracket [{r_lo}, {r_hi}] does not straddle target {target}: p(r_lo)={p_lo}, p(r_hi)={p_hi}"
    )]
    InvalidBracket {
        r_lo: f64,
        r_hi: f64,
        p_lo: f64,
        p_hi: f64,
        target: f64,
    },

    #[error(
        "no admissible R up to cap {cap}: largest volume fraction {best_fraction} \
         (log exposure {best_log_exposure} at R={best_radius})"
    )]
    NoAdmissibleRadius {
        cap: f64,
        best_fraction: f64,
        best_log_exposure: f64,
        best_radius: f64,
    },

    #[error("infeasible SNR configuration: TN/P = {required} exceeds l(0) = {available}")]
    Infeasible { required: f64, available: f64 },

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("optimizer failed to bracket an interior optimum: {0}")]
    Bracket(String),

    #[error("truncated probability mass {0:e} exceeds 1e-12; increase the cap")]
    Truncation(f64),

    #[error("boxes {0} and {1} overlap")]
    OverlappingBoxes(usize, usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
