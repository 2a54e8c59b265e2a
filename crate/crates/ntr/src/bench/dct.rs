//! Orthonormal DCT-II measurement operator with row selection and call
//! accounting.

use std::cell::Cell;
use std::sync::Arc;

use ndarray::Array1;
use rustdct::{DctPlanner, TransformType2And3};

use crate::problem::Vector;

/// `A = R C` where `C` is the orthonormal DCT-II and `R` selects `rows`.
/// Every forward or adjoint application increments the call counter by one.
pub struct PartialDct {
    n: usize,
    rows: Vec<usize>,
    plan: Arc<dyn TransformType2And3<f64>>,
    calls: Cell<u64>,
}

impl PartialDct {
    pub fn new(n: usize, rows: Vec<usize>) -> Self {
        assert!(rows.iter().all(|&r| r < n));
        let plan = DctPlanner::new().plan_dct2(n);
        Self { n, rows, plan, calls: Cell::new(0) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    pub fn reset_calls(&self) {
        self.calls.set(0);
    }

    /// Orthonormal DCT-II of `x` (no row selection, no call accounting).
    pub fn dct(&self, x: &Vector) -> Vector {
        let mut buf = x.to_vec();
        self.plan.process_dct2(&mut buf);
        let n = self.n as f64;
        buf[0] *= (1.0 / n).sqrt();
        for v in buf.iter_mut().skip(1) {
            *v *= (2.0 / n).sqrt();
        }
        Array1::from(buf)
    }

    /// Transpose (= inverse) of the orthonormal DCT-II.
    pub fn idct(&self, y: &Vector) -> Vector {
        let n = self.n as f64;
        let mut buf = y.to_vec();
        // raw DCT-III halves the first input; compensate together with the
        // orthonormal scaling
        buf[0] *= 2.0 * (1.0 / n).sqrt();
        for v in buf.iter_mut().skip(1) {
            *v *= (2.0 / n).sqrt();
        }
        self.plan.process_dct3(&mut buf);
        Array1::from(buf)
    }

    /// `A x`: selected rows of the transform.
    pub fn apply(&self, x: &Vector) -> Vector {
        self.calls.set(self.calls.get() + 1);
        let full = self.dct(x);
        Array1::from_iter(self.rows.iter().map(|&r| full[r]))
    }

    /// `A^T y`: inverse transform of the zero-scattered coefficients.
    pub fn adjoint(&self, y: &Vector) -> Vector {
        self.calls.set(self.calls.get() + 1);
        let mut full = Array1::zeros(self.n);
        for (i, &r) in self.rows.iter().enumerate() {
            full[r] = y[i];
        }
        self.idct(&full)
    }
}
