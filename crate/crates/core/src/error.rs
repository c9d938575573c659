use thiserror::Error;

/// Failure classes shared by every numerical module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("curve tangent vanishes on a sampled region near (s={s}, t={t})")]
    DegenerateCurve { s: f64, t: f64 },

    #[error("quadrature failed on [{lo}, {hi}] after {panels} panels{context}")]
    QuadratureFailure {
        lo: f64,
        hi: f64,
        panels: usize,
        context: String,
    },

    #[error("coupling eps_a = {0} must be strictly negative")]
    InvalidCoupling(f64),

    #[error("no bound state at p3 = {p3} (existence threshold {threshold})")]
    NoBoundState { p3: f64, threshold: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("budget exceeded: {what} requested {requested}, limit {limit}")]
    BudgetExceeded {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("no critical-point-free cone exists for epsilon1 = {0}")]
    ConeEmpty(f64),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Attaches a location note to a quadrature failure; other variants pass through.
    pub fn at(self, note: impl std::fmt::Display) -> Self {
        match self {
            Error::QuadratureFailure {
                lo,
                hi,
                panels,
                context,
            } => Error::QuadratureFailure {
                lo,
                hi,
                panels,
                context: format!("{context} at {note}"),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
