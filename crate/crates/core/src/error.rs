use thiserror::Error;

/// Errors raised by the simulation and fitting routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate readout: reference fluorescence is zero")]
    DegenerateReadout,

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("flat data: all y values are identical, nothing to fit")]
    FlatData,

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True when the error stems from the user-supplied configuration rather
    /// than from running the physics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Context { source, .. } => source.is_config(),
            _ => false,
        }
    }

    /// Short machine-readable tag for the error category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::DegenerateReadout => "degenerate-readout",
            Error::ProtocolViolation(_) => "protocol-violation",
            Error::DegenerateFit(_) => "degenerate-fit",
            Error::FlatData => "flat-data",
            Error::Config(_) => "config",
            Error::Context { source, .. } => source.kind(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be finite, got {value}"
        )))
    }
}
