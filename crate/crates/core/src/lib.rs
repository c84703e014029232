//! Penalized log-det barrier approximation of convexity-constrained
//! variational problems on planar domains.
//!
//! A minimizer of `int_{Omega_0} F(x, u, Du)` over convex `u` equal to `phi`
//! outside `Omega_0` is approximated by minimizers of
//!
//! ```text
//! J_eps(u) = int_{Omega_0} F(x, u, Du)
//!          + (1/eps) int_{Omega \ Omega_0} G(u - phi_eps)
//!          - eps int_Omega log det D^2 u
//! ```
//!
//! as `eps -> 0`.

pub mod audit;
pub mod discrete;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod solver;

pub use discrete::{DiscreteEnergy, EnergyBreakdown, HessianField, ScalarField, Sym2};
pub use error::{Error, Result};
pub use geometry::{BoundaryData, DomainSpec, Grid, InnerShape, Mask, Point};
pub use model::{GrowthEnvelope, Lagrangian, PenaltyG};
pub use solver::{EpsSchedule, MuSchedule, NewtonConfig, Problem, SolveReport, SweepReport};
pub use audit::AuditOutcome;
