//! Bi-level Landweber reconstruction for semilinear parabolic inverse problems.
//!
//! The forward model is `u_t - (a u_x)_x + c u + Phi(u) = phi` on an
//! interval with homogeneous Dirichlet data, discretised by lumped finite
//! differences in space and backward Euler in time. The unknown parameter
//! `theta = (a, c, phi, u0)` is reconstructed from noisy observations of `u`
//! by an outer Landweber iteration whose state solves are themselves
//! replaced by an inner Landweber iteration on the all-at-once residual.
//!
//! Module map:
//!
//! * [`spaces`]: grid, operators, inner products, Riesz maps.
//! * [`model`]: parameter, residual and its derivatives.
//! * [`reference`]: backward-Euler/Newton oracle solver.
//! * [`lower`]: inner Landweber for the state equation.
//! * [`adjoint`]: backward adjoint equation and `S'(theta)*`.
//! * [`observe`]: observation operators and noise.
//! * [`upper`]: outer Landweber, stopping rules, constants.
//! * [`diagnostics`]: probes, monotonicity checks, rate fits.
//! * [`fixture`]: manufactured-solution test problems.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adjoint;
pub mod diagnostics;
pub mod error;
pub mod fixture;
pub mod linalg;
pub mod lower;
pub mod model;
pub mod observe;
pub mod par;
pub mod reference;
pub mod spaces;
pub mod upper;

pub use error::{Error, Result};
pub use model::{ActiveSet, Nonlinearity, Parameter, PdeModel, ResidualPair, StateField};
pub use observe::{ObservationData, ObservationSpec};
pub use par::Execution;
pub use spaces::{Discretization, SpaceTag, SpaceTimeGrid};
