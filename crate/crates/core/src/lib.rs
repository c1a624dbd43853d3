//! Unbounded motions of a ball bouncing on a periodically moving racket.
//!
//! The crate evaluates the impact map of the bouncing ball, certifies the
//! period-two unbounded orbit of a one-parameter family of degree-two
//! trigonometric rackets whose speed stays below `g/4`, and computes the
//! stable manifold of that orbit, a one-dimensional continuum of initial
//! conditions whose velocities grow without bound.
//!
//! Long orbits are hyperbolic and amplify round-off by about 11 per cycle, so
//! the routines are generic over [`Real`] and run in multiprecision with
//! [`Precise`] where the horizon demands it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod format;
pub mod impact;
pub mod linear;
pub mod manifold;
pub mod orbit;
pub mod racket;
pub mod real;

pub use error::{Error, Result};
pub use impact::{
    divided_difference, gs_step, impact_time, iterate, step_backward, step_forward, step_jacobian,
    ImpactState, MapKind, SolverConfig,
};
pub use linear::{
    cycle_matrix_at, scan_family, spectral_split, trace_criterion, Mat2, ScanRow, SpectralSplit,
    TraceCheck,
};
pub use manifold::{
    manifold_at_n0, solve_theta, verify_continuum, ManifoldConfig, ManifoldContext, ManifoldSample,
};
pub use orbit::{
    build_n2_schedule, build_pustylnikov_ladder, certify_unbounded, check_cycle_conditions,
    CertificateReport, OrbitSchedule,
};
pub use racket::{
    derivative_bound, family_coefficients, minimize_bound, true_max_derivative, Derivative,
    FamilyParams, TrigPoly2, OPTIMAL_S,
};
pub use real::{Mp, Precise, Real};
