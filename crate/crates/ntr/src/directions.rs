//! Pseudo-gradients `g(x) = u(x) d(x)` and the stationarity residual.
//!
//! Two families are provided: the steepest-descent/normal-map choice
//! `g = grad f(x) + P_{d phi(x)}(-grad f(x))` and the natural-residual
//! choice `g = F_nat` (optionally scaled by `lambda`, the variant used in
//! the experiments). In all cases `d` is kept as a unit vector and
//! `u = -||g||`, so `g = u d` holds exactly and `u` upper-bounds the
//! directional derivative `psi'(x; d)` for the normal-map and scaled
//! natural-residual choices (the sharp bound along `-F_nat` is
//! `-lambda ||F_nat||`, so the unscaled variant requires `lambda >= 1`).

use ndarray::Array1;

use crate::error::Result;
use crate::problem::{CompositeProblem, Vector};
use crate::regularizers::Metric;

/// Which pseudo-gradient the solver uses.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum PseudoGradientKind {
    /// `g = grad f + P_{d phi(x)}(-grad f)`, the minimum-norm subgradient.
    NormalMap,
    /// `g = F_nat^lambda(x)`.
    NaturalResidual(f64),
    /// `g = lambda * F_nat^lambda(x)`, the experiment default.
    ScaledNaturalResidual(f64),
}

/// A pseudo-gradient decomposed as `g = u d` with `||d|| in {0, 1}` and
/// `u <= 0`; all three are zero exactly at stationary points.
#[derive(Debug, Clone)]
pub struct DirectionOutput {
    pub g: Vector,
    pub u: f64,
    pub d: Vector,
}

impl DirectionOutput {
    fn from_g(g: Vector) -> Self {
        let norm = g.dot(&g).sqrt();
        if norm == 0.0 {
            let n = g.len();
            return Self { g, u: 0.0, d: Array1::zeros(n) };
        }
        let d = g.mapv(|v| -v / norm);
        Self { g, u: -norm, d }
    }

    pub fn is_zero(&self) -> bool {
        self.u == 0.0
    }
}

/// Minimum-norm element of `d psi(x)`, computed through the projection onto
/// `d phi(x)`.
pub fn normal_map_g(problem: &CompositeProblem, x: &Vector) -> Result<DirectionOutput> {
    let grad = problem.grad_f(x)?;
    let proj = problem.regularizer.subdiff_project(x, &grad.mapv(|v| -v));
    Ok(DirectionOutput::from_g(grad + proj))
}

/// `F_nat^lambda(x) = x - prox^lambda(x - grad f(x) / lambda)`.
pub fn natural_residual(problem: &CompositeProblem, x: &Vector, lambda: f64) -> Result<Vector> {
    let grad = problem.grad_f(x)?;
    let z = x - &(grad / lambda);
    let p = problem.regularizer.prox(&z, &Metric::scalar(lambda))?;
    Ok(x - &p)
}

pub fn pseudo_gradient(
    problem: &CompositeProblem,
    x: &Vector,
    kind: PseudoGradientKind,
) -> Result<DirectionOutput> {
    match kind {
        PseudoGradientKind::NormalMap => normal_map_g(problem, x),
        PseudoGradientKind::NaturalResidual(lambda) => {
            Ok(DirectionOutput::from_g(natural_residual(problem, x, lambda)?))
        }
        PseudoGradientKind::ScaledNaturalResidual(lambda) => {
            let f = natural_residual(problem, x, lambda)?;
            Ok(DirectionOutput::from_g(f.mapv(|v| lambda * v)))
        }
    }
}

/// Stopping measure `lambda * ||F_nat^lambda(x)||_2`.
pub fn stopping_residual(problem: &CompositeProblem, x: &Vector, lambda: f64) -> Result<f64> {
    let f = natural_residual(problem, x, lambda)?;
    Ok(lambda * f.dot(&f).sqrt())
}
