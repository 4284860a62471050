//! Numerical core for Lagrangian motion of one-dimensional bodies
//! embedded in the line.
//!
//! The configuration of a body (an interval) is an embedding into the
//! real line, discretized by nodal values on a uniform grid. This crate
//! provides:
//!
//! * the grid, field, configuration and section substrate ([`grid`],
//!   [`field`]);
//! * the L2 material metric, its flat/sharp maps, kinetic and path
//!   energies, and force pairings ([`metric`]);
//! * the explicit Levi-Civita data of that metric: Christoffel form,
//!   covariant derivative along a curve, acceleration, geodesic residual
//!   and parallel transport ([`connection`]);
//! * method-of-lines integration of the equation of motion
//!   `gamma_tt = c_F sigma - 2 gamma_t gamma_xt / gamma_x`, with force
//!   models, free or pinned-band boundary handling and an embedding
//!   guard ([`dynamics`]);
//! * variations of paths, the first variation of the energy with jump
//!   and boundary terms, and the variational residual test for the
//!   equation of motion ([`variation`]).
//!
//! Everything is pure-functional over immutable values; no interior
//! mutability, so values may be shared across threads freely.

// Guards like `!(slope.abs() >= eps)` are written with negated
// comparisons on purpose: NaN must count as a violation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod connection;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod grid;
pub mod metric;
pub mod path;
pub mod variation;

pub use connection::{
    acceleration, christoffel, covariant_derivative_along, geodesic_residual,
    geodesic_residual_sup, parallel_transport,
};
pub use dynamics::{
    diagnostics_for, flux_balance_defect, relative_energy_drift, rhs, simulate, step,
    Diagnostics, ForceKind, ForceModel, Rhs, Scheme, SimulationAbort, State, Trajectory,
};
pub use error::{Error, Result};
pub use field::{zero_band, Configuration, ScalarField, Section, SupportMode};
pub use grid::BodyGrid;
pub use metric::{
    flat, force_pairing, kinetic, metric, path_energy, sharp, volume_density, CovectorDensity,
};
pub use path::{PathField, PathSegment, PiecewisePath};
pub use variation::{
    first_variation_rhs, motion_residual, seeded_variational_field, FirstVariationEvaluator,
    Variation,
};
