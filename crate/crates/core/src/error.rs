use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("adjacency is not symmetric: {0} lists {1} but not vice versa")]
    AsymmetricAdjacency(usize, usize),
    #[error("cluster {0} has no nodes")]
    EmptyCluster(usize),
    #[error("cluster {0} is not connected through intra-cluster edges")]
    DisconnectedCluster(usize),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("input model is not wide-sense stationary: {0}")]
    UnstableInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("prototype length {len} is not a multiple of 2*{subbands}")]
    BankLength { len: usize, subbands: usize },
    #[error("theory recursion dimension {dim} exceeds cap {cap}")]
    TheoryCapExceeded { dim: usize, cap: usize },
    #[error("not mean-square stable at this step size (spectral radius {0})")]
    NotMeanSquareStable(f64),
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("iterative solver did not converge (residual {0:e})")]
    NoConvergence(f64),
}
