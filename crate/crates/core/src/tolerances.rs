//! Numerical tolerances shared across the crate.
//!
//! Algebraic identities are checked relatively, inequalities with an
//! additive slack. Everything that compares floating point results against a
//! threshold reads it from here.

/// Smallest accepted exponent.
pub const MIN_EXPONENT: f64 = 1.1;
/// Largest accepted exponent.
pub const MAX_EXPONENT: f64 = 10.0;

/// Relative tolerance for algebraic identities such as `<x, Jx> = |x|^2`.
pub const IDENTITY_REL: f64 = 1e-10;
/// Additive slack for inequalities that involve two duality map evaluations.
pub const INEQUALITY_SLACK: f64 = 1e-9;
/// Slack for `phi(x, y) >= (|x| - |y|)^2`.
pub const PHI_LOWER_SLACK: f64 = 1e-12;
/// Slack for sampled monotonicity `<x - y, Ax - Ay> >= 0`.
pub const MONOTONE_SLACK: f64 = 1e-10;

/// Default acceptance threshold for the variational inequality of `Q_C`.
pub const VI_TOLERANCE: f64 = 1e-6;
/// Projected-gradient stationarity target of the projection solver.
pub const PROJECTION_GRADIENT_TOL: f64 = 1e-9;
/// Iteration cap of the projection solver.
pub const PROJECTION_MAX_ITER: usize = 10_000;
/// Armijo sufficient-decrease constant.
pub const ARMIJO_C: f64 = 1e-4;

/// Residual `|J z + r A z - J x|_q` accepted for a resolvent point.
pub const RESOLVENT_TOLERANCE: f64 = 1e-8;
/// Residual target of the resolvent solver.
pub const RESOLVENT_GRADIENT_TOL: f64 = 1e-10;
/// Iteration cap of the resolvent solver.
pub const RESOLVENT_MAX_ITER: usize = 20_000;
/// Eigenvalue floor accepted by the PSD check.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Slack on the per-step inequalities of the driver and on type (r) checks.
pub const STEP_SLACK: f64 = 1e-7;
/// Membership tolerance for points that must lie in a constraint set.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// Default outer stopping tolerance.
pub const STOP_TOL: f64 = 1e-3;
/// Default outer iteration budget.
pub const MAX_ITER: usize = 1_000_000;

/// Number of leading schedule indices validated eagerly.
pub const SCHEDULE_SCAN: usize = 1_000_000;

/// Default thresholds of the strongly-relatively-nonexpansive diagnostic.
pub const SRNS_EPS_D: f64 = 1e-6;
pub const SRNS_EPS_E: f64 = 1e-3;

/// Thresholds of the uniform-convexity check on blend steps.
pub const UCFT_GAP: f64 = 1e-8;
pub const UCFT_DIFF: f64 = 1e-3;
