use thiserror::Error;

/// Errors produced by the genotype, smoothing, testing, and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("position error: {0}")]
    Position(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("empty region: {0}")]
    EmptyRegion(String),
    #[error("region too large for the exhaustive oracle: {n_variants} variants (max {max})")]
    TooLargeForOracle { n_variants: usize, max: usize },
    #[error("basis error: {0}")]
    Basis(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("GCV selection failed: {0}")]
    Gcv(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("group error: {0}")]
    Group(String),
    #[error("zero within-group degrees of freedom (n = k = {n})")]
    ZeroWithinDf { n: usize },
    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("sampling timeout: {0}")]
    SamplingTimeout(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code: 2 for data/input problems, 3 for numeric degeneracies.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_)
            | Error::Position(_)
            | Error::Shape(_)
            | Error::EmptyRegion(_)
            | Error::Group(_)
            | Error::Config(_)
            | Error::Basis(_)
            | Error::Domain(_)
            | Error::Grid(_)
            | Error::TooLargeForOracle { .. }
            | Error::Io(_) => 2,
            Error::InsufficientData(_)
            | Error::Gcv(_)
            | Error::ZeroWithinDf { .. }
            | Error::DegenerateDenominator(_)
            | Error::DegenerateCovariance(_)
            | Error::Numeric(_)
            | Error::SamplingTimeout(_) => 3,
        }
    }
}
