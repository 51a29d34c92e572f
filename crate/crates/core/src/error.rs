use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model or operation parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The requested region carries infinite intensity mass.
    #[error("infinite measure: {0}")]
    InfiniteMeasure(String),

    /// Input points are affinely dependent where independence is required.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// Not enough points for the requested construction.
    #[error("too few points: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("rescaling undefined for the Gaussian model")]
    RescaleUndefined,

    /// A bound cannot reach the requested probability inside its validity range.
    #[error("unattainable: {0}")]
    Unattainable(String),

    /// A compact test set is too close to the window boundary.
    #[error("undecidable margin: {0}")]
    UndecidableMargin(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("dimension {0} not supported here")]
    Dimension(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
