use thiserror::Error;

/// Errors produced by the model, generator, estimators and file layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {abs_error:e}, {evaluations} evaluations")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        abs_error: f64,
        evaluations: usize,
    },

    #[error("no equilibrium: {0}")]
    NoEquilibrium(String),

    #[error("singular design: column `{column}` is collinear with the preceding columns")]
    Singular { column: String },

    #[error("weak instrument: |corr(z, x)| = {corr:e}")]
    WeakInstrument { corr: f64 },

    #[error("too few observations: need more than {needed}, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("unknown regressor `{0}`")]
    UnknownRegressor(String),

    #[error("unknown land-cover code {code}; valid codes: {valid}")]
    UnknownLandCover { code: i32, valid: String },

    #[error("empty subset: {0}")]
    EmptySubset(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{0}")]
    Refused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable tag for reports and result files.
    pub fn reason_code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParams(_) => "invalid-params",
            Error::Quadrature { .. } => "quadrature",
            Error::NoEquilibrium(_) => "no-equilibrium",
            Error::Singular { .. } => "singular",
            Error::WeakInstrument { .. } => "weak-instrument",
            Error::TooFewObservations { .. } => "too-few-observations",
            Error::UnknownRegressor(_) => "unknown-regressor",
            Error::UnknownLandCover { .. } => "unknown-land-cover",
            Error::EmptySubset(_) => "empty-subset",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Refused(_) => "refused",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
