//! Nonconvex binary classification with the tanh loss
//! `f(x) = (1/N) sum_i (1 - tanh(b_i a_i' x))`.

use std::cell::Cell;

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::problem::{SmoothOracle, Vector};
use crate::regularizers::Regularizer;

#[derive(Debug, Clone)]
pub struct ClassificationInstance {
    /// Row-major data matrix, one sample per row.
    pub a: Array2<f64>,
    /// Labels in {-1, +1}.
    pub b: Vec<f64>,
    pub mu: f64,
}

impl ClassificationInstance {
    pub fn samples(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn problem(&self) -> crate::error::Result<crate::problem::CompositeProblem> {
        crate::problem::CompositeProblem::new(
            Box::new(TanhOracle::new(self.clone())),
            Regularizer::l1(self.mu, self.dim()),
        )
    }
}

/// Synthetic separable-with-noise instance: Gaussian samples labelled by a
/// random sparse hyperplane, a fraction of labels flipped.
pub fn gen_classification(
    n: usize,
    samples: usize,
    flip_fraction: f64,
    mu: f64,
    seed: u64,
) -> ClassificationInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; n];
    for wi in w.iter_mut().take((n / 10).max(1)) {
        *wi = rng.gen_range(-1.0..1.0);
    }
    let mut a = Array2::zeros((samples, n));
    let mut b = Vec::with_capacity(samples);
    for i in 0..samples {
        let mut score = 0.0;
        for j in 0..n {
            let (u1, u2): (f64, f64) =
                (rng.gen_range(f64::EPSILON..1.0), rng.gen_range(0.0..1.0));
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            a[[i, j]] = z;
            score += z * w[j];
        }
        let mut label = if score >= 0.0 { 1.0 } else { -1.0 };
        if rng.gen_bool(flip_fraction) {
            label = -label;
        }
        b.push(label);
    }
    ClassificationInstance { a, b, mu }
}

/// Dense tanh-loss oracle. One matrix application (forward or transpose)
/// counts as one operator call.
pub struct TanhOracle {
    instance: ClassificationInstance,
    calls: Cell<u64>,
}

impl TanhOracle {
    pub fn new(instance: ClassificationInstance) -> Self {
        assert!(instance.b.iter().all(|&l| l == 1.0 || l == -1.0));
        Self { instance, calls: Cell::new(0) }
    }

    /// `z_i = b_i a_i' x`
    fn margins(&self, x: &Vector) -> Vector {
        self.calls.set(self.calls.get() + 1);
        let ax = self.instance.a.dot(x);
        Array1::from_iter(ax.iter().zip(&self.instance.b).map(|(&v, &l)| l * v))
    }

    fn weighted_adjoint(&self, w: &Vector) -> Vector {
        self.calls.set(self.calls.get() + 1);
        self.instance.a.t().dot(w)
    }
}

impl SmoothOracle for TanhOracle {
    fn dim(&self) -> usize {
        self.instance.dim()
    }

    fn eval(&self, x: &Vector) -> f64 {
        let z = self.margins(x);
        let inv_n = 1.0 / self.instance.samples() as f64;
        z.iter().map(|&zi| 1.0 - zi.tanh()).sum::<f64>() * inv_n
    }

    fn grad(&self, x: &Vector) -> Vector {
        // -(1/N) sum_i sech^2(z_i) b_i a_i
        let z = self.margins(x);
        let inv_n = 1.0 / self.instance.samples() as f64;
        let w = Array1::from_iter(z.iter().zip(&self.instance.b).map(|(&zi, &l)| {
            let sech2 = 1.0 - zi.tanh() * zi.tanh();
            -inv_n * sech2 * l
        }));
        self.weighted_adjoint(&w)
    }

    fn hvp(&self, x: &Vector, v: &Vector) -> Vector {
        // (1/N) A' diag(2 tanh(z) sech^2(z)) A v   (b_i^2 = 1)
        let z = self.margins(x);
        self.calls.set(self.calls.get() + 1);
        let av = self.instance.a.dot(v);
        let inv_n = 1.0 / self.instance.samples() as f64;
        let w = Array1::from_iter(z.iter().zip(av.iter()).map(|(&zi, &avi)| {
            let t = zi.tanh();
            inv_n * 2.0 * t * (1.0 - t * t) * avi
        }));
        self.weighted_adjoint(&w)
    }

    fn operator_calls(&self) -> u64 {
        self.calls.get()
    }
}
