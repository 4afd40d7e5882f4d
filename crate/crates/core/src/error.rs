use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate spectrum: u[{0}] and u[{1}] coincide")]
    DegenerateSpectrum(usize, usize),
    #[error("non-generic rays: rays {0:?} and {1:?} coincide")]
    NonGenericRays((usize, usize), (usize, usize)),
    #[error("no admissible delta in (0, pi/2)")]
    NoAdmissibleDelta,
    #[error("rotation angle {phi} collides with separating ray at theta = {theta}")]
    RayCollision { phi: f64, theta: f64 },
    #[error("rotation angle {0} outside (0, 2pi]")]
    BadRotation(f64),
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("matrix is not upper unitriangular")]
    NotUnitriangular,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid rank {rank} for family {family}")]
    InvalidRank { family: String, rank: usize },
    #[error("modulus violation: |a[{index}]| = {modulus} >= 1")]
    ModulusViolation { index: usize, modulus: f64 },
    #[error("mu = {0} is not on the contour")]
    ContourViolation(String),
    #[error("positivity not certified: {0}")]
    CertificationMissing(String),
    #[error("solve failure at x = {x}: {reason}")]
    SolveFailure { x: f64, reason: String },
    #[error("point {0} too close to the contour")]
    NearContour(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("metric is singular")]
    SingularMetric,
    #[error("integration failed: {0}")]
    StiffnessFailure(String),
    #[error("structure violation in factor {factor}: {detail}")]
    StructureViolation { factor: usize, detail: String },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
