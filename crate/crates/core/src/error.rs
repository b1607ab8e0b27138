use std::path::PathBuf;

/// Errors produced by model construction, relaxation assembly, and file I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not Hermitian: {0}")]
    NotHermitian(String),

    #[error("polynomial is not Hermitian-symmetric: {0}")]
    NotHermitianSymmetric(String),

    #[error("relaxation order {order} is below the minimum order {d_min}")]
    OrderTooLow { order: usize, d_min: usize },

    #[error("monomial basis for s={s}, d={d} is too large")]
    BasisTooLarge { s: usize, d: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("missing moment for key {0}")]
    MissingMoment(String),

    #[error("solve did not reach optimality (status {0})")]
    NotOptimal(String),

    #[error("unsupported constraint family: {0}")]
    Unsupported(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
