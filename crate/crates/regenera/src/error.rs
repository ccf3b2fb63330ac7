use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid angle T2 = {t2}: admissible range is {range}")]
    InvalidAngle { t2: f64, range: &'static str },
    #[error("neck ({k},{i}) too wide: |t| = {abs_t:e} but epsilon^2 = {eps_sq:e}")]
    NeckTooWide { k: usize, i: usize, abs_t: f64, eps_sq: f64 },
    #[error("epsilon {epsilon} too large for marked points at distance {distance}")]
    SeparationViolation { epsilon: f64, distance: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("point {r} lies outside the neck annulus of ({k},{i})")]
    OutsideAnnulus { k: usize, i: usize, r: String },
    #[error("neck ({k},{i}) is closed (t = 0)")]
    ClosedNode { k: usize, i: usize },
    #[error("point is not marked on this sphere")]
    UnknownPoint,
    #[error("circle of radius {radius} around {center} encloses another pole")]
    CircleEnclosesMultiplePoints { center: String, radius: f64 },
    #[error("path passes within {distance:e} of a pole (minimum {minimum:e})")]
    PathTooClose { distance: f64, minimum: f64 },
    #[error("quadrature did not converge after {points} points")]
    QuadratureNotConverged { points: usize },
    #[error("neck matching did not converge after {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },
    #[error("jacobian is numerically singular")]
    SingularJacobian,
    #[error("line search could not reduce the residual (norm {norm:e})")]
    NoProgress { norm: f64 },
    #[error("iteration limit {max_iter} reached with residual {norm:e}")]
    IterationLimit { max_iter: usize, norm: f64 },
    #[error("finite difference step underflow for parameter {index}")]
    StepUnderflow { index: usize },
    #[error("continuation stalled at x = {x} after {levels} bisections")]
    ContinuationStalled { x: f64, levels: usize },
    #[error("end {end} has zero third residue")]
    ZeroResidue { end: String },
    #[error("cycle defect {defect:e} exceeds tolerance {tolerance:e}")]
    PeriodNotClosed { defect: f64, tolerance: f64 },
    #[error("mesh domain touches a puncture: {0}")]
    DomainTouchesPuncture(String),
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("function vanishes or is not finite on the counting contour")]
    ZeroOnContour,
    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
