use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("not an Orlicz N-function: {0}")]
    InvalidNFunction(String),

    #[error("numeric conjugate is not convex on the grid (defect {defect:.3e} at x={x})")]
    GridTooCoarse { x: f64, defect: f64 },

    #[error("value {y} is outside the invertible range [0, {max}]")]
    OutOfRange { y: f64, max: f64 },

    #[error("Δ2 condition fails for b={b}: sup ratio {sup_ratio} ≥ 1")]
    Delta2Fails { b: f64, sup_ratio: f64 },

    #[error("operation requires a Δ2 certificate for b=2")]
    Delta2Missing,

    #[error("subset is empty")]
    EmptySubset,

    #[error("exact computation requested for {n} points, above the cap of {cap}")]
    ExactTooLarge { n: usize, cap: usize },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("moment order p={0} must be ≥ 1")]
    InvalidP(f64),

    #[error("sequence is not admissible: {0}")]
    NotAdmissible(String),

    #[error("set functional oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("maximal separated set reached m={m} points at level n={level}")]
    PackingTooLarge { level: usize, m: usize, witness: Vec<usize> },

    #[error("empirical MGF overflow at λ={lambda}")]
    MgfOverflow { lambda: f64 },

    #[error("tail bound {bound:.3e} at u={u} is below the Monte Carlo resolution {resolution:.3e}")]
    ResolutionTooLow { u: f64, bound: f64, resolution: f64 },

    #[error("no tabulated constant for α={0}")]
    AlphaUnsupported(f64),

    #[error("cone has empty intersection with the unit sphere")]
    EmptyCone,

    #[error("solver did not converge after {iterations} iterations (gap {gap:.3e})")]
    NotConverged { iterations: usize, gap: f64, iterate: Vec<f64> },

    #[error("no positive conic singular value estimate")]
    NoPositiveEstimate,

    #[error("precondition violated: {0}")]
    Precondition(String),
}
