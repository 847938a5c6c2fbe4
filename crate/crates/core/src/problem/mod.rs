//! Problem abstractions and the built-in test catalog.
//!
//! A [`SmoothProblem`] wraps an [`Objective`] φ: Rⁿ → R together with its
//! starting point and, when known, the optimal value φ*. A
//! [`ResidualProblem`] wraps a set of [`Residuals`] γ: Rⁿ → Rᵐ whose
//! objective is ½‖γ(x)‖².
//!
//! Second-order information is only ever exposed as the quadratic form
//! `pᵀ∇²φ(x)p`; full Hessians are never materialized.

mod catalog;
mod models;

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Result};

pub use catalog::{catalog, lookup_residual, lookup_smooth, CatalogEntry, Metadata};
pub use models::{diagonal_quadratic, SumOfSquares};

/// A smooth scalar objective with optional analytic derivative hooks.
pub trait Objective: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// `pᵀ∇²φ(x)p`.
    fn hessian_quadform(&self, _x: &[f64], _p: &[f64]) -> Option<f64> {
        None
    }
}

/// A vector of individually evaluable residual components.
///
/// Evaluating component `i` must never require evaluating any other
/// component; the oracle accounting relies on it.
pub trait Residuals: Send + Sync {
    fn m(&self) -> usize;

    fn component(&self, x: &[f64], i: usize) -> f64;

    /// Row `i` of the Jacobian, `∂γ_i/∂x_j`.
    fn jacobian_row(&self, _x: &[f64], _i: usize) -> Option<Vec<f64>> {
        None
    }

    /// `pᵀ∇²γ_i(x)p`.
    fn component_curvature(&self, _x: &[f64], _i: usize, _p: &[f64]) -> Option<f64> {
        None
    }
}

#[derive(Clone)]
pub struct SmoothProblem {
    pub name: String,
    pub x0: Vec<f64>,
    pub phi_star: Option<f64>,
    objective: Arc<dyn Objective>,
}

impl SmoothProblem {
    pub fn new(
        name: impl Into<String>,
        x0: Vec<f64>,
        phi_star: Option<f64>,
        objective: Arc<dyn Objective>,
    ) -> Self {
        assert!(!x0.is_empty(), "problem dimension must be positive");
        Self {
            name: name.into(),
            x0,
            phi_star,
            objective,
        }
    }

    pub fn n(&self) -> usize {
        self.x0.len()
    }

    /// Exact (noise-free) objective value.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.n(), x.len())?;
        Ok(self.objective.value(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        check_dim(self.n(), x.len())?;
        Ok(self.objective.gradient(x))
    }

    pub fn hessian_quadform(&self, x: &[f64], p: &[f64]) -> Result<Option<f64>> {
        check_dim(self.n(), x.len())?;
        check_dim(self.n(), p.len())?;
        Ok(self.objective.hessian_quadform(x, p))
    }

    pub fn has_gradient(&self) -> bool {
        self.objective.gradient(&self.x0).is_some()
    }

    pub fn has_hessian(&self) -> bool {
        self.objective.hessian_quadform(&self.x0, &self.x0).is_some()
    }

    pub fn objective(&self) -> &Arc<dyn Objective> {
        &self.objective
    }
}

impl fmt::Debug for SmoothProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothProblem")
            .field("name", &self.name)
            .field("n", &self.n())
            .field("phi_star", &self.phi_star)
            .finish()
    }
}

#[derive(Clone)]
pub struct ResidualProblem {
    pub name: String,
    pub x0: Vec<f64>,
    /// Known optimal value of ½‖γ(x)‖².
    pub phi_star: Option<f64>,
    residuals: Arc<dyn Residuals>,
}

impl ResidualProblem {
    pub fn new(
        name: impl Into<String>,
        x0: Vec<f64>,
        phi_star: Option<f64>,
        residuals: Arc<dyn Residuals>,
    ) -> Self {
        assert!(!x0.is_empty(), "problem dimension must be positive");
        assert!(residuals.m() > 0, "residual count must be positive");
        Self {
            name: name.into(),
            x0,
            phi_star,
            residuals,
        }
    }

    pub fn n(&self) -> usize {
        self.x0.len()
    }

    pub fn m(&self) -> usize {
        self.residuals.m()
    }

    /// Noise-free component γ_i(x), zero-based.
    pub fn component(&self, x: &[f64], i: usize) -> Result<f64> {
        check_dim(self.n(), x.len())?;
        if i >= self.m() {
            return crate::error::invalid(format!(
                "residual index {i} out of range for m = {}",
                self.m()
            ));
        }
        Ok(self.residuals.component(x, i))
    }

    pub fn residual_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n(), x.len())?;
        Ok((0..self.m()).map(|i| self.residuals.component(x, i)).collect())
    }

    /// ½ Σ γ_i(x)².
    pub fn residual_objective(&self, x: &[f64]) -> Result<f64> {
        let r = self.residual_vector(x)?;
        Ok(0.5 * r.iter().map(|v| v * v).sum::<f64>())
    }

    /// Analytic Jacobian as row-major rows, if available.
    pub fn jacobian(&self, x: &[f64]) -> Result<Option<Vec<Vec<f64>>>> {
        check_dim(self.n(), x.len())?;
        Ok((0..self.m())
            .map(|i| self.residuals.jacobian_row(x, i))
            .collect())
    }

    pub fn residuals(&self) -> &Arc<dyn Residuals> {
        &self.residuals
    }

    /// The sum-of-squares smooth form Σγ_i², which is how the unconstrained
    /// catalog states least-squares problems.
    pub fn to_sum_of_squares(&self, phi_star: Option<f64>) -> SmoothProblem {
        SmoothProblem::new(
            self.name.clone(),
            self.x0.clone(),
            phi_star,
            Arc::new(SumOfSquares::new(self.residuals.clone())),
        )
    }
}

impl fmt::Debug for ResidualProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResidualProblem")
            .field("name", &self.name)
            .field("n", &self.n())
            .field("m", &self.m())
            .field("phi_star", &self.phi_star)
            .finish()
    }
}
