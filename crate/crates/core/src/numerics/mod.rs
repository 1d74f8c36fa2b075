//! Quadrature, cubature, root finding and Monte Carlo used by the physics
//! modules and by the verification oracles.

pub mod cubature;
pub mod montecarlo;
pub mod quadrature;
pub mod roots;

use serde::{Deserialize, Serialize};

/// Result of a numerical integration with its absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl Integral {
    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            if self.error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.error / self.value.abs()
        }
    }
}

/// Stopping rule shared by the adaptive integrators: stop once the error
/// estimate is below `max(abs_tol, rel_tol * |value|)` or after `max_evals`
/// integrand calls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_evals: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self {
            rel,
            ..Self::default()
        }
    }

    pub fn with_max_evals(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub(crate) fn satisfied(&self, value: f64, error: f64) -> bool {
        error <= self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel: 1e-6,
            abs: 0.0,
            max_evals: 2_000_000,
        }
    }
}

/// Max-heap entry keyed on an error estimate.
pub(crate) struct ByError<T> {
    pub error: f64,
    pub item: T,
}

impl<T> PartialEq for ByError<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error).is_eq()
    }
}

impl<T> Eq for ByError<T> {}

impl<T> PartialOrd for ByError<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for ByError<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}
