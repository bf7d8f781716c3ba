use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("menus are not structurally congruent: {0}")]
    Congruence(String),

    #[error("malformed structure: {0}")]
    Structure(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("size error: {0}")]
    Size(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("distribution spec error: {0}")]
    Spec(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("training diverged at step {step}: objective is {value}")]
    Diverged { step: usize, value: f64 },

    #[error("invalid menu: {0}")]
    InvalidMenu(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
