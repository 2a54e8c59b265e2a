//! Smooth oracle and composite problem assembly.
//!
//! A composite problem is `psi(x) = f(x) + phi(x)` where `f` is smooth
//! (possibly nonconvex) and `phi` is real-valued convex. The smooth part is
//! accessed through the [`SmoothOracle`] trait which also tallies expensive
//! operator applications (e.g. transform calls for the partial-DCT least
//! squares objective).

use ndarray::Array1;

use crate::error::{NtrError, Result};
use crate::regularizers::Regularizer;

pub type Vector = Array1<f64>;

/// Smooth part of a composite objective.
///
/// `operator_calls` counts applications of the expensive linear operator
/// backing the oracle (one per forward or adjoint apply); oracles without such
/// an operator may leave it at zero.
pub trait SmoothOracle {
    fn dim(&self) -> usize;
    fn eval(&self, x: &Vector) -> f64;
    fn grad(&self, x: &Vector) -> Vector;
    /// Hessian-vector product at `x` applied to `v`.
    fn hvp(&self, x: &Vector, v: &Vector) -> Vector;
    fn operator_calls(&self) -> u64 {
        0
    }
}

/// Composite problem `psi = f + phi`.
pub struct CompositeProblem {
    pub smooth: Box<dyn SmoothOracle>,
    pub regularizer: Regularizer,
}

impl CompositeProblem {
    pub fn new(smooth: Box<dyn SmoothOracle>, regularizer: Regularizer) -> Result<Self> {
        if smooth.dim() != regularizer.dim() {
            return Err(NtrError::DimensionMismatch {
                expected: smooth.dim(),
                got: regularizer.dim(),
            });
        }
        Ok(Self { smooth, regularizer })
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    /// `psi(x) = f(x) + phi(x)`.
    pub fn eval_psi(&self, x: &Vector) -> Result<f64> {
        self.check_input(x)?;
        let v = self.smooth.eval(x) + self.regularizer.value(x);
        if !v.is_finite() {
            return Err(NtrError::NonFinite { context: "eval_psi" });
        }
        Ok(v)
    }

    /// Gradient of the smooth part with a hard NaN/Inf check.
    pub fn grad_f(&self, x: &Vector) -> Result<Vector> {
        self.check_input(x)?;
        let g = self.smooth.grad(x);
        if !g.iter().all(|v| v.is_finite()) {
            return Err(NtrError::NonFinite { context: "grad_f" });
        }
        Ok(g)
    }

    fn check_input(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(NtrError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(NtrError::NonFinite { context: "input point" });
        }
        Ok(())
    }
}

/// Finite-difference validation report for a smooth oracle.
#[derive(Debug, Clone, Copy)]
pub struct FiniteDiffReport {
    pub max_grad_err: f64,
    pub max_hvp_err: f64,
}

/// Checks the analytic gradient and Hessian-vector product of `oracle`
/// against central differences at `x`.
///
/// The gradient is sampled on up to 20 coordinates; the Hessian-vector
/// product on 5 random-ish directions built from alternating signs. Errors
/// are absolute maxima over the samples.
pub fn finite_diff_check(oracle: &dyn SmoothOracle, x: &Vector, h: f64) -> FiniteDiffReport {
    assert!(h > 0.0, "finite difference step must be positive");
    let n = x.len();
    let g = oracle.grad(x);

    let sampled: Vec<usize> = if n <= 20 {
        (0..n).collect()
    } else {
        let stride = n / 20;
        (0..20).map(|i| i * stride).collect()
    };

    let mut max_grad_err: f64 = 0.0;
    for &i in &sampled {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fd = (oracle.eval(&xp) - oracle.eval(&xm)) / (2.0 * h);
        max_grad_err = max_grad_err.max((fd - g[i]).abs());
    }

    let mut max_hvp_err: f64 = 0.0;
    for k in 0..5 {
        let v: Vector = (0..n)
            .map(|i| if (i + k) % 2 == 0 { 1.0 } else { -1.0 } / (n as f64).sqrt())
            .collect();
        let hv = oracle.hvp(x, &v);
        let xp = x + &(h * &v);
        let xm = x - &(h * &v);
        let fd = (oracle.grad(&xp) - oracle.grad(&xm)) / (2.0 * h);
        let err = (&fd - &hv).iter().fold(0.0f64, |a, d| a.max(d.abs()));
        max_hvp_err = max_hvp_err.max(err);
    }

    FiniteDiffReport { max_grad_err, max_hvp_err }
}

/// Quadratic oracle `f(x) = 1/2 x'Qx + c'x` with a dense symmetric `Q`.
/// Used by tests and the smooth sanity problems.
pub struct QuadraticOracle {
    pub q: Vec<Vector>, // rows of Q
    pub c: Vector,
}

impl QuadraticOracle {
    pub fn new(q: Vec<Vector>, c: Vector) -> Self {
        assert_eq!(q.len(), c.len());
        Self { q, c }
    }

    /// `f(x) = 1/2 ||x - center||^2`.
    pub fn shifted_identity(center: &Vector) -> Self {
        let n = center.len();
        let q = (0..n)
            .map(|i| Array1::from_shape_fn(n, |j| if i == j { 1.0 } else { 0.0 }))
            .collect();
        Self { q, c: center.mapv(|v| -v) }
    }

    fn qx(&self, x: &Vector) -> Vector {
        self.q.iter().map(|row| row.dot(x)).collect()
    }
}

impl SmoothOracle for QuadraticOracle {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn eval(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&self.qx(x)) + self.c.dot(x)
    }

    fn grad(&self, x: &Vector) -> Vector {
        self.qx(x) + &self.c
    }

    fn hvp(&self, _x: &Vector, v: &Vector) -> Vector {
        self.qx(v)
    }
}
