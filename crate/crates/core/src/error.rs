use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix has full column rank, nullspace is trivial")]
    FullRank,
    #[error("input contains NaN or infinite entries")]
    NonFinite,
    #[error("cardinality k = {k} outside the admissible range [{min}, {max}]")]
    BadK { k: usize, min: usize, max: usize },
    #[error("input has zero norm")]
    ZeroInput,
    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NonSymmetric(f64),
    #[error("iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("problem size {n} exceeds the brute-force limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("rounding input has diagonal deviating from one by {0:e}")]
    BadX(f64),
    #[error("all diagonal entries of the relaxation solution vanish")]
    DegenerateX,
    #[error("approximation ratio undefined outside its regime: {0}")]
    OutOfRegime(String),
    #[error("alpha_k = {0} must be below 1/2")]
    BadAlpha(f64),
    #[error("constraint set has no identity direction for dual repair")]
    NoIdentityDirection,
    #[error("problem is infeasible: {0}")]
    Infeasible(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::BadK { k, min: 1, max: n });
    }
    Ok(())
}
