//! Numerical thresholds shared across modules.

/// Default trapezoid resolution on circles.
pub const CIRCLE_POINTS: usize = 256;
/// Successive trapezoid results must agree to this before doubling stops.
pub const CIRCLE_DOUBLING_TOL: f64 = 1e-12;
/// Hard cap on trapezoid resolution.
pub const CIRCLE_MAX_POINTS: usize = 1 << 16;
/// Relative tolerance of the adaptive Gauss-Kronrod path rule.
pub const PATH_REL_TOL: f64 = 1e-12;
/// Principal-part truncation order at neck points.
pub const TRUNCATION_ORDER: usize = 8;
/// Points of the trapezoid rule used for neck Taylor coefficients.
pub const TAYLOR_POINTS: usize = 64;
/// Matching iteration stops once the coefficient change drops below this.
pub const MATCHING_TOL: f64 = 1e-14;
/// Matching iteration budget.
pub const MATCHING_MAX_ITER: usize = 50;
/// Default Newton tolerance on the residual sup-norm.
pub const NEWTON_TOL: f64 = 1e-10;
/// Default Newton iteration budget.
pub const NEWTON_MAX_ITER: usize = 25;
/// Smallest step fraction tried by the line search.
pub const MIN_DAMPING: f64 = 1.0 / (1u64 << 20) as f64;
/// Relative singular value cutoff of the least-squares step.
pub const SVD_RCOND: f64 = 1e-10;
/// Relative finite-difference step.
pub const FD_REL_STEP: f64 = 1e-6;
/// Absolute floor of the finite-difference step.
pub const FD_ABS_STEP: f64 = 1e-8;
/// Step used when differentiating in a closed neck parameter t.
pub const FD_T_STEP: f64 = 1e-7;
/// Step in a neck (u, v) column, as a multiple of x²; t changes by this
/// relative amount.
pub const FD_NECK_STEP: f64 = 1e-3;
/// Maximum bisection depth of a continuation step.
pub const MAX_BISECTIONS: usize = 12;
/// Non-tree edge defect allowed after lattice reduction.
pub const CYCLE_DEFECT_TOL: f64 = 1e-6;
/// Default fraction of the minimal marked-point distance used for epsilon.
pub const EPSILON_FRACTION: f64 = 0.1;
