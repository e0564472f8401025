use alloc::string::String;

/// Errors raised by the imaging library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    /// The phase design objective became non-finite.
    #[error(
        "phase design diverged at iteration {iteration} (objective {objective}); \
         retry with a smaller step size than {step_size}"
    )]
    Divergence {
        iteration: usize,
        objective: f64,
        step_size: f64,
    },

    /// Exhaustive support search would enumerate too many candidates.
    #[error("exhaustive search over {count} supports exceeds the limit of {limit}")]
    TooLarge { count: u128, limit: u128 },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
