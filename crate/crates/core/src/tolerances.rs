//! Numerical tolerances shared across the crate.

/// Relative accuracy target of the sampled dual-norm maximisation.
pub const TOL_DUAL: f64 = 1e-6;

/// Allowed axiom violation for closed-form structures (roundoff only).
pub const TOL_AXIOM: f64 = 1e-9;

/// Slack for exact graph-metric identities (triangle inequality, monotonicity).
pub const TOL_GRAPH: f64 = 1e-12;

/// Coarse sphere directions used by the dual solver in two dimensions.
pub const DUAL_DIRECTIONS_2D: usize = 256;

/// Coarse sphere directions used by the dual solver in three or more dimensions.
pub const DUAL_DIRECTIONS_3D: usize = 2048;

/// Composite midpoint samples per straight edge.
pub const QUADRATURE_POINTS: usize = 5;

/// Depth to which fat-Cantor membership is resolved.
pub const CANTOR_DEPTH: u32 = 30;
