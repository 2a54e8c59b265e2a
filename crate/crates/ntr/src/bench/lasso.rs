//! Partial-DCT Lasso instances: random generation and the smooth oracle
//! `f(x) = 1/2 ||A x - b||^2`.

use ndarray::Array1;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NtrError, Result};
use crate::problem::{SmoothOracle, Vector};
use crate::regularizers::Regularizer;

use super::dct::PartialDct;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoInstance {
    pub n: usize,
    pub m: usize,
    /// Selected transform rows, |rows| = m.
    pub rows: Vec<usize>,
    pub b: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub dynamic_range: f64,
    pub sigma: f64,
    pub mu: f64,
    pub seed: u64,
}

/// Random sparse-recovery instance. The planted signal has `ceil(n/40)`
/// nonzeros with magnitudes `10^(d * u / 20)`, `u` uniform on [0,1], and
/// random signs; `b = A x_hat + sigma * noise`. When `mu` is `None` the
/// weight defaults to `0.1 * ||A^T b||_inf`.
pub fn gen_lasso(
    n: usize,
    m: usize,
    dynamic_range: f64,
    sigma: f64,
    mu: Option<f64>,
    seed: u64,
) -> Result<LassoInstance> {
    if m > n {
        return Err(NtrError::InvalidArgument(format!(
            "m = {m} measurement rows exceed dimension n = {n}"
        )));
    }
    if dynamic_range < 0.0 {
        return Err(NtrError::InvalidArgument("dynamic range must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let k = (n + 39) / 40;
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut rng);
    let mut x_hat = vec![0.0; n];
    for &p in positions.iter().take(k) {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let u: f64 = rng.gen_range(0.0..1.0);
        x_hat[p] = sign * 10f64.powf(dynamic_range * u / 20.0);
    }

    let mut row_pool: Vec<usize> = (0..n).collect();
    row_pool.shuffle(&mut rng);
    let mut rows: Vec<usize> = row_pool.into_iter().take(m).collect();
    rows.sort_unstable();

    let op = PartialDct::new(n, rows.clone());
    let mut b = op.apply(&Array1::from(x_hat.clone()));
    // Box-Muller normal noise, drawn after the signal so the signal layout
    // is independent of sigma
    for v in b.iter_mut() {
        let (u1, u2): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen_range(0.0..1.0));
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        *v += sigma * z;
    }

    let mu = match mu {
        Some(m) => m,
        None => {
            let atb = op.adjoint(&b);
            0.1 * atb.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
        }
    };
    Ok(LassoInstance {
        n,
        m,
        rows,
        b: b.to_vec(),
        x_hat,
        dynamic_range,
        sigma,
        mu,
        seed,
    })
}

/// Smooth oracle for `1/2 ||A x - b||^2` with `A` the partial DCT.
/// Costs: eval 1 operator call, grad 2, hvp 2.
pub struct LassoOracle {
    op: PartialDct,
    b: Vector,
}

impl LassoOracle {
    pub fn new(instance: &LassoInstance) -> Self {
        Self {
            op: PartialDct::new(instance.n, instance.rows.clone()),
            b: Array1::from(instance.b.clone()),
        }
    }

    pub fn operator(&self) -> &PartialDct {
        &self.op
    }
}

impl SmoothOracle for LassoOracle {
    fn dim(&self) -> usize {
        self.op.n()
    }

    fn eval(&self, x: &Vector) -> f64 {
        let r = self.op.apply(x) - &self.b;
        0.5 * r.dot(&r)
    }

    fn grad(&self, x: &Vector) -> Vector {
        let r = self.op.apply(x) - &self.b;
        self.op.adjoint(&r)
    }

    fn hvp(&self, _x: &Vector, v: &Vector) -> Vector {
        let av = self.op.apply(v);
        self.op.adjoint(&av)
    }

    fn operator_calls(&self) -> u64 {
        self.op.calls()
    }
}

impl LassoInstance {
    /// Assembles the composite problem `1/2 ||Ax-b||^2 + mu ||x||_1`.
    pub fn problem(&self) -> Result<crate::problem::CompositeProblem> {
        crate::problem::CompositeProblem::new(
            Box::new(LassoOracle::new(self)),
            Regularizer::l1(self.mu, self.n),
        )
    }
}
