//! Independent closed-form solutions used to validate the integrators.

pub mod bessel;
pub mod eigen;
mod quadratic;
mod radial;

pub use bessel::bessel_j;
pub use quadratic::{ArclengthEstimate, QuadraticOracle, QuadraticSpec};
pub use radial::{eps0_torque_functional, gradient_flow_hit_time, gradient_flow_hit_time_numeric, radial_eps0_reduction};

use crate::error::Result;

/// `(X(t), Ẋ(t))` of the Nesterov flow on `½ xᵀQx` from rest at `x0`.
pub fn quadratic_nesterov_closed_form(spec: &QuadraticSpec, x0: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(QuadraticOracle::new(spec, x0)?.state_at(t))
}

/// Path length of the closed-form flow over `[0, horizon]` plus a tail bound.
pub fn quadratic_arclength(spec: &QuadraticSpec, x0: &[f64], horizon: f64) -> Result<ArclengthEstimate> {
    QuadraticOracle::new(spec, x0)?.arclength(horizon)
}
