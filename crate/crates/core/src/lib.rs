//! Numerical laboratory for the critical Nesterov flow
//! `Ẍ + (3/t)Ẋ + ∇f(X) = 0` over a convex potential whose trajectories have
//! infinite length, together with gradient flow and the closed-form
//! quadratic case.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod integrator;
pub mod oracles;
pub mod potential;
pub mod quadrature;
pub mod table;

pub use error::{Error, FailureKind, IntegrationError, Result};
pub use integrator::{FlowState, IntegratorConfig, Trajectory};
pub use potential::{PotentialSpec, RadialProfile};
