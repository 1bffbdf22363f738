use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state is not normalized (|norm² − 1| = {deviation:.3e})")]
    NotNormalized { deviation: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("not a physical density operator: {0}")]
    NonPhysical(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids: {0}")]
    GridMismatch(String),

    #[error("OAM index {ell} exceeds the aliasing bound n/8 = {bound}")]
    AliasingBound { ell: i32, bound: i32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("projector set is rank deficient (rank {rank}, need 16)")]
    RankDeficient { rank: usize },

    #[error(
        "optimizer did not converge after {iterations} iterations \
         (residual {residual:.3e}); best iterate attached"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<crate::tomography::MleReconstruction>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("image error: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
