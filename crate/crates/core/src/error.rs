use std::fmt;

use thiserror::Error;

use crate::integrator::Trajectory;

/// Errors raised by the potential, oracle and diagnostics layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("insufficient span: {0}")]
    InsufficientSpan(String),
    #[error("missing accumulators: {0}")]
    MissingAccumulators(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Why an integration aborted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FailureKind {
    /// Step size fell below `1e-14 * t`.
    StepUnderflow { t: f64, h: f64 },
    /// The state picked up a NaN or infinity.
    NonFinite { t: f64 },
    /// Step budget exhausted before `t_end`.
    HorizonNotReached { t: f64 },
    /// Polar leg radius dropped below `1e-14`.
    RadiusCollapse { t: f64, r: f64 },
    /// The orbit period is no longer small against `t`, so orbit averaging is invalid.
    AveragingBreakdown { t: f64, ratio: f64 },
    /// The inputs violate a precondition of the requested leg.
    InvalidInput,
}

impl FailureKind {
    pub fn tag(&self) -> &'static str {
        match self {
            FailureKind::StepUnderflow { .. } => "StepUnderflow",
            FailureKind::NonFinite { .. } => "NonFinite",
            FailureKind::HorizonNotReached { .. } => "HorizonNotReached",
            FailureKind::RadiusCollapse { .. } => "RadiusCollapse",
            FailureKind::AveragingBreakdown { .. } => "AveragingBreakdown",
            FailureKind::InvalidInput => "InvalidInput",
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureKind::StepUnderflow { t, h } => write!(f, "StepUnderflow at t={t:e} (h={h:e})"),
            FailureKind::NonFinite { t } => write!(f, "NonFinite state at t={t:e}"),
            FailureKind::HorizonNotReached { t } => write!(f, "HorizonNotReached, stopped at t={t:e}"),
            FailureKind::RadiusCollapse { t, r } => write!(f, "RadiusCollapse at t={t:e} (r={r:e})"),
            FailureKind::AveragingBreakdown { t, ratio } => {
                write!(f, "AveragingBreakdown at t={t:e} (period/t={ratio:e})")
            }
            FailureKind::InvalidInput => write!(f, "InvalidInput"),
        }
    }
}

/// An aborted integration: the failure tag plus everything computed up to it.
#[derive(Clone, Error)]
#[error("integration failed: {kind}{}", detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default())]
pub struct IntegrationError {
    pub kind: FailureKind,
    pub detail: Option<String>,
    pub partial: Box<Trajectory>,
}

// the partial trajectory can hold millions of samples; summarise it
impl fmt::Debug for IntegrationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntegrationError")
            .field("kind", &self.kind)
            .field("detail", &self.detail)
            .field("partial_samples", &self.partial.samples.len())
            .field("partial_end", &self.partial.last().map(|s| s.t))
            .finish()
    }
}

impl IntegrationError {
    pub fn new(kind: FailureKind, partial: Trajectory) -> Self {
        IntegrationError { kind, detail: None, partial: Box::new(partial) }
    }

    pub fn invalid(detail: impl Into<String>) -> Self {
        IntegrationError {
            kind: FailureKind::InvalidInput,
            detail: Some(detail.into()),
            partial: Box::new(Trajectory::default()),
        }
    }
}
