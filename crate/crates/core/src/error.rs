use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    /// Two HODLR operands do not share the same block partition.
    #[error("{op}: operands have different block partitions")]
    TreeMismatch { op: &'static str },

    #[error("SVD of a {rows}x{cols} matrix did not converge")]
    SvdNotConverged { rows: usize, cols: usize },

    /// A leaf Cholesky factorization met a pivot that is not positive.
    #[error("cholesky breakdown in leaf {leaf}: pivot {pivot:e} at local index {index} is not positive")]
    CholeskyBreakdown { leaf: usize, index: usize, pivot: f64 },

    #[error("triangular solve: leaf {leaf} has a zero diagonal entry at local index {index}")]
    SingularLeaf { leaf: usize, index: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("unsupported HDLR format: {0}")]
    Format(String),

    #[error("corrupt HDLR data: {0}")]
    Corrupt(String),
}

impl Error {
    pub(crate) fn dims(
        op: &'static str,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
