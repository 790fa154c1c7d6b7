use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite rate in region {region} at {year} sim BC: {dump}")]
    NonFinite { region: usize, year: f64, dump: String },

    #[error(
        "time step {dt} a too large: region {region} {variable} changes by {change:.4} \
         per step (limit {limit:.4})"
    )]
    Unstable {
        region: usize,
        variable: &'static str,
        dt: f64,
        change: f64,
        limit: f64,
    },

    #[error("degenerate regression: {0}")]
    Degenerate(String),

    #[error("data quality: {0}")]
    DataQuality(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical integration itself.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Unstable { .. })
    }
}
