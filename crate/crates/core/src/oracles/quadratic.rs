//! Closed-form Nesterov flow for quadratic potentials `½ xᵀQx`.
//!
//! In the eigenbasis `y = Ux` the flow decouples into scalar equations
//! `ÿᵢ + (3/t)ẏᵢ + λᵢyᵢ = 0` whose solutions are
//! `yᵢ(t) = 2aᵢ J₁(√λᵢ t)/(√λᵢ t)` with `ẏᵢ(t) = −(2aᵢ/t) J₂(√λᵢ t)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature;

use super::bessel::{j1_over_x, j2_over_x};
use super::eigen::jacobi_eigen;

/// Eigenvalues below this are treated as exact zeros.
const ZERO_EIGENVALUE: f64 = 1e-12;

/// A symmetric positive semidefinite matrix with its eigendecomposition
/// `Q = Uᵀ Λ U`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSpec {
    dim: usize,
    matrix: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// Row-major; row `i` is the `i`-th eigenvector.
    basis: Vec<f64>,
}

impl QuadraticSpec {
    /// Validates symmetry and semidefiniteness and diagonalises `Q`.
    pub fn new(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if dim == 0 || matrix.len() != dim * dim {
            return Err(Error::Domain(format!("expected {dim}x{dim} entries, got {}", matrix.len())));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        let scale = matrix.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..dim {
            for j in 0..i {
                if (matrix[i * dim + j] - matrix[j * dim + i]).abs() > 1e-12 * scale {
                    return Err(Error::Domain(format!("matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        let eig = jacobi_eigen(&matrix, dim, 1e-15);
        let mut eigenvalues = eig.values;
        for lambda in eigenvalues.iter_mut() {
            if *lambda < -ZERO_EIGENVALUE * scale {
                return Err(Error::Domain(format!("matrix is not positive semidefinite (eigenvalue {lambda})")));
            }
            if *lambda < ZERO_EIGENVALUE {
                *lambda = 0.0;
            }
        }
        Ok(QuadraticSpec { dim, matrix, eigenvalues, basis: eig.rows })
    }

    /// `Q = diag(λ)`.
    pub fn diagonal(lambdas: &[f64]) -> Result<Self> {
        let d = lambdas.len();
        let mut m = vec![0.0; d * d];
        for (i, l) in lambdas.iter().enumerate() {
            m[i * d + i] = *l;
        }
        QuadraticSpec::new(d, m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Row-major orthogonal `U`.
    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    /// `‖UᵀΛU − Q‖_max`.
    pub fn reconstruction_error(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let v: f64 = (0..d).map(|k| self.basis[k * d + i] * self.eigenvalues[k] * self.basis[k * d + j]).sum();
                worst = worst.max((v - self.matrix[i * d + j]).abs());
            }
        }
        worst
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            let row = &self.matrix[i * d..(i + 1) * d];
            s += x[i] * row.iter().zip(x).map(|(q, xj)| q * xj).sum::<f64>();
        }
        0.5 * s
    }

    /// `out = Qx`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (o, row) in out[..d].iter_mut().zip(self.matrix.chunks_exact(d)) {
            *o = row.iter().zip(x).map(|(q, xj)| q * xj).sum();
        }
    }

    /// `y = Ux`.
    pub fn to_modal(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|i| (0..d).map(|j| self.basis[i * d + j] * x[j]).sum()).collect()
    }

    /// `x = Uᵀy`.
    pub fn from_modal(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|j| (0..d).map(|i| self.basis[i * d + j] * y[i]).sum()).collect()
    }
}

/// Path length over `[0, horizon]` and an envelope estimate of what remains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArclengthEstimate {
    pub value: f64,
    pub tail_bound: f64,
}

/// The exact Nesterov trajectory of a quadratic from `X(0) = x0`, `Ẋ(0) = 0`.
#[derive(Debug, Clone)]
pub struct QuadraticOracle {
    spec: QuadraticSpec,
    modal_start: Vec<f64>,
}

impl QuadraticOracle {
    pub fn new(spec: &QuadraticSpec, x0: &[f64]) -> Result<Self> {
        if x0.len() != spec.dim() {
            return Err(Error::Dimension { expected: spec.dim(), got: x0.len() });
        }
        Ok(QuadraticOracle { spec: spec.clone(), modal_start: spec.to_modal(x0) })
    }

    pub fn spec(&self) -> &QuadraticSpec {
        &self.spec
    }

    /// `a = U·X0`.
    pub fn modal_start(&self) -> &[f64] {
        &self.modal_start
    }

    /// `(yᵢ(t), ẏᵢ(t))` in modal coordinates.
    pub fn modal_state(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let t = t.max(0.0);
        self.spec
            .eigenvalues
            .iter()
            .zip(&self.modal_start)
            .map(|(&lambda, &a)| {
                if lambda == 0.0 {
                    (a, 0.0)
                } else {
                    let w = lambda.sqrt();
                    let x = w * t;
                    (2.0 * a * j1_over_x(x), -2.0 * a * w * j2_over_x(x))
                }
            })
            .unzip()
    }

    /// `(X(t), Ẋ(t))`.
    pub fn state_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (y, ydot) = self.modal_state(t);
        (self.spec.from_modal(&y), self.spec.from_modal(&ydot))
    }

    pub fn speed(&self, t: f64) -> f64 {
        let (_, ydot) = self.modal_state(t);
        ydot.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `∫₀^horizon ‖Ẋ(t)‖ dt` by adaptive quadrature over panels a quarter
    /// oscillation wide, plus the tail estimate
    /// `Σ 2|aᵢ| ∫_{√λᵢ H}^∞ env(s)/s ds` with `env(s) = √(2/(πs))·(1 + 2/s²)`.
    pub fn arclength(&self, horizon: f64) -> Result<ArclengthEstimate> {
        if !(horizon > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        let lambda_max = self.spec.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if lambda_max == 0.0 || self.modal_start.iter().all(|a| *a == 0.0) {
            return Ok(ArclengthEstimate { value: 0.0, tail_bound: 0.0 });
        }
        let panel = 0.5 * PI / lambda_max.sqrt();
        let panels = (horizon / panel).ceil().max(1.0) as usize;
        let width = horizon / panels as f64;
        let mut value = 0.0;
        for k in 0..panels {
            let lo = k as f64 * width;
            let hi = if k + 1 == panels { horizon } else { lo + width };
            value += quadrature::integrate(|t| self.speed(t), lo, hi, 1e-15, 1e-13).value;
        }
        let tail_bound = self
            .spec
            .eigenvalues
            .iter()
            .zip(&self.modal_start)
            .filter(|(l, _)| **l > 0.0)
            .map(|(&l, &a)| {
                let s = l.sqrt() * horizon;
                // ∫_s^∞ √(2/π) u^{-3/2} (1 + 2/u²) du
                2.0 * a.abs() * (2.0 / PI).sqrt() * (2.0 / s.sqrt() + 4.0 / (5.0 * s.powf(2.5)))
            })
            .sum();
        Ok(ArclengthEstimate { value, tail_bound })
    }
}
