//! Probes of the structural constants and checks on iteration histories.
//!
//! Probes sample random pairs and report the extreme observed ratio, so they
//! can certify that an assumption fails but never that it holds.

mod consistency;
mod history;
mod lemmas;
mod norm;
mod probes;
pub mod sampling;

pub use consistency::{check_gradient, check_state_adjoint, AdjointCheck, GradientCheck};
pub use history::{
    check_fejer, check_fejer_above, check_residual_monotone, fit_rate, fit_rate_window, RateFit, RATE_SLOPE_THRESHOLD,
};
pub use lemmas::{verify_error_lemmas, BilinearFit, ErrorLemmaConfig, ErrorLemmaReport, ErrorLemmaSample};
pub use norm::{estimate_operator_norm, NormEstimate};
pub use probes::{
    probe_coercivity, probe_pl, probe_tangential_cone_lower, probe_tangential_cone_upper, ProbeConfig, ProbeReport,
};
