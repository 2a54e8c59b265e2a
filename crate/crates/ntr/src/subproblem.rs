//! Trust-region subproblem machinery for the quadratic model
//! `m(s) = psi_k + <g, s> + 1/2 <s, B s>` with `||s|| <= Delta`.
//!
//! `B` is a linear operator and may be asymmetric (e.g. a generalized
//! Jacobian of the natural residual); CG-based solvers then work on the
//! symmetrized operator, which leaves the quadratic form unchanged.

use ndarray::Array1;

use crate::error::{NtrError, Result};
use crate::problem::Vector;

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &Vector) -> Vector;
    /// Transpose apply; required when the operator is used unsymmetrized
    /// inside CG-Steihaug. Defaults to `apply` (symmetric operator).
    fn apply_transpose(&self, v: &Vector) -> Vector {
        self.apply(v)
    }
}

/// Dense row-major operator, mainly for tests and small problems.
pub struct DenseOperator {
    pub rows: Vec<Vector>,
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.rows.len()
    }
    fn apply(&self, v: &Vector) -> Vector {
        self.rows.iter().map(|r| r.dot(v)).collect()
    }
    fn apply_transpose(&self, v: &Vector) -> Vector {
        let n = self.dim();
        Array1::from_shape_fn(n, |j| (0..n).map(|i| self.rows[i][j] * v[i]).sum())
    }
}

/// Scaled identity `c * I`.
pub struct ScaledIdentity {
    pub dim: usize,
    pub scale: f64,
}

impl LinearOperator for ScaledIdentity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, v: &Vector) -> Vector {
        v.mapv(|x| self.scale * x)
    }
}

pub struct QuadraticModel<'a> {
    pub psi_k: f64,
    pub g: Vector,
    pub b: &'a dyn LinearOperator,
    pub symmetric: bool,
}

impl<'a> QuadraticModel<'a> {
    pub fn new(psi_k: f64, g: Vector, b: &'a dyn LinearOperator, symmetric: bool) -> Self {
        Self { psi_k, g, b, symmetric }
    }

    /// `1/2 (B + B^T) v`; equal to `B v` for symmetric operators.
    pub fn b_sym(&self, v: &Vector) -> Vector {
        if self.symmetric {
            self.b.apply(v)
        } else {
            let bv = self.b.apply(v);
            let btv = self.b.apply_transpose(v);
            (bv + btv).mapv(|x| 0.5 * x)
        }
    }

    pub fn eval(&self, s: &Vector) -> f64 {
        self.psi_k + self.g.dot(s) + 0.5 * s.dot(&self.b.apply(s))
    }

    /// `m(0) - m(s)`.
    pub fn reduction(&self, s: &Vector) -> f64 {
        -self.g.dot(s) - 0.5 * s.dot(&self.b.apply(s))
    }

    /// Power-method estimate of `||B_sym||` (spectral norm).
    pub fn norm_estimate(&self, iters: usize) -> f64 {
        let n = self.b.dim();
        let mut v: Vector = Array1::from_shape_fn(n, |i| {
            // fixed deterministic probe
            ((i as f64 + 1.0) * 0.7391).sin()
        });
        let mut norm = 0.0;
        for _ in 0..iters {
            let len = v.dot(&v).sqrt();
            if len == 0.0 {
                return 0.0;
            }
            v.mapv_inplace(|x| x / len);
            let w = self.b_sym(&v);
            norm = w.dot(&w).sqrt();
            v = w;
        }
        norm
    }
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub s: Vector,
    pub predicted_reduction: f64,
    pub hit_boundary: bool,
    pub inner_iterations: usize,
    /// Regularization actually used, when applicable.
    pub t_k: f64,
    /// Set when the solver stopped on an iteration cap or stagnation.
    pub flagged: bool,
}

/// Minimizer of the model along `-g` within the trust region.
pub fn cauchy_point(model: &QuadraticModel, delta: f64) -> Result<SubproblemSolution> {
    let g = &model.g;
    let gnorm = g.dot(g).sqrt();
    if !(delta > 0.0) || gnorm == 0.0 {
        return Err(NtrError::InvalidArgument(
            "cauchy point needs delta > 0 and g != 0".into(),
        ));
    }
    let bg = model.b.apply(g);
    let gbg = g.dot(&bg);
    let t_max = delta / gnorm;
    let (t, boundary) = if gbg <= 0.0 {
        (t_max, true)
    } else {
        let t_star = gnorm * gnorm / gbg;
        if t_star >= t_max {
            (t_max, true)
        } else {
            (t_star, false)
        }
    };
    let s = g.mapv(|v| -t * v);
    Ok(SubproblemSolution {
        predicted_reduction: model.reduction(&s),
        s,
        hit_boundary: boundary,
        inner_iterations: 0,
        t_k: 0.0,
        flagged: false,
    })
}

/// Truncated CG on the (symmetrized) model. Starts at zero, so the model
/// value is monotonically nonincreasing and never worse than the Cauchy
/// point.
pub fn cg_steihaug(
    model: &QuadraticModel,
    delta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SubproblemSolution> {
    let g = &model.g;
    let gnorm = g.dot(g).sqrt();
    if !(delta > 0.0) || gnorm == 0.0 {
        return Err(NtrError::InvalidArgument(
            "cg-steihaug needs delta > 0 and g != 0".into(),
        ));
    }
    let mut z: Vector = Array1::zeros(g.len());
    let mut r = g.clone();
    let mut d = g.mapv(|v| -v);
    let mut iterations = 0;

    let boundary_step = |z: &Vector, d: &Vector| -> Vector {
        // positive root of ||z + tau d|| = delta
        let dd = d.dot(d);
        let zd = z.dot(d);
        let zz = z.dot(z);
        let tau = (-zd + (zd * zd + dd * (delta * delta - zz)).sqrt()) / dd;
        z + &d.mapv(|v| tau * v)
    };

    loop {
        if iterations >= max_iter {
            return Ok(SubproblemSolution {
                predicted_reduction: model.reduction(&z),
                s: z,
                hit_boundary: false,
                inner_iterations: iterations,
                t_k: 0.0,
                flagged: true,
            });
        }
        let bd = model.b_sym(&d);
        let dbd = d.dot(&bd);
        if dbd <= 0.0 {
            let s = boundary_step(&z, &d);
            return Ok(SubproblemSolution {
                predicted_reduction: model.reduction(&s),
                s,
                hit_boundary: true,
                inner_iterations: iterations,
                t_k: 0.0,
                flagged: false,
            });
        }
        let rr = r.dot(&r);
        let alpha = rr / dbd;
        let z_next = &z + &d.mapv(|v| alpha * v);
        if z_next.dot(&z_next).sqrt() >= delta {
            let s = boundary_step(&z, &d);
            return Ok(SubproblemSolution {
                predicted_reduction: model.reduction(&s),
                s,
                hit_boundary: true,
                inner_iterations: iterations + 1,
                t_k: 0.0,
                flagged: false,
            });
        }
        let r_next = &r + &bd.mapv(|v| alpha * v);
        iterations += 1;
        if r_next.dot(&r_next).sqrt() <= tol * gnorm {
            return Ok(SubproblemSolution {
                predicted_reduction: model.reduction(&z_next),
                s: z_next,
                hit_boundary: false,
                inner_iterations: iterations,
                t_k: 0.0,
                flagged: false,
            });
        }
        let beta = r_next.dot(&r_next) / rr;
        d = r_next.mapv(|v| -v) + &d.mapv(|v| beta * v);
        z = z_next;
        r = r_next;
    }
}

/// Regularized step: solve `(B + t I) p = -g` to the residual bound
/// `||r|| <= lambda1 / (2 (lambda1 + lambda2)) ||g||`, then project onto
/// the trust region. Curvature below `lambda1` observed during the
/// iteration triggers a restart with a larger `t` (up to 5 retries), after
/// which the Cauchy point is used.
pub fn regularized_step(
    model: &QuadraticModel,
    delta: f64,
    lambda1: f64,
    lambda2: f64,
    cg_tol: f64,
) -> Result<SubproblemSolution> {
    let g = &model.g;
    let gnorm = g.dot(g).sqrt();
    if !(delta > 0.0) || gnorm == 0.0 {
        return Err(NtrError::InvalidArgument(
            "regularized step needs delta > 0 and g != 0".into(),
        ));
    }
    let target = (lambda1 / (2.0 * (lambda1 + lambda2)) * gnorm).min(cg_tol * gnorm);
    let mut t = 0.0f64;
    for _retry in 0..=5 {
        match cg_solve_regularized(model, t, target, lambda1, 4 * g.len()) {
            Some((p, iters)) => {
                let pnorm = p.dot(&p).sqrt();
                let scale = delta.min(pnorm) / pnorm;
                let s = p.mapv(|v| scale * v);
                return Ok(SubproblemSolution {
                    predicted_reduction: model.reduction(&s),
                    s,
                    hit_boundary: pnorm >= delta,
                    inner_iterations: iters,
                    t_k: t,
                    flagged: false,
                });
            }
            None => {
                t = if t == 0.0 { 1e-8 } else { 10.0 * t };
            }
        }
    }
    cauchy_point(model, delta)
}

/// Plain CG for `(B_sym + t I) p = -g`; `None` when curvature below
/// `lambda1` is observed.
fn cg_solve_regularized(
    model: &QuadraticModel,
    t: f64,
    abs_tol: f64,
    lambda1: f64,
    max_iter: usize,
) -> Option<(Vector, usize)> {
    let g = &model.g;
    let mut p: Vector = Array1::zeros(g.len());
    let mut r = g.mapv(|v| -v); // residual of (B + tI) p = -g at p = 0
    let mut d = r.clone();
    let mut iters = 0;
    loop {
        if r.dot(&r).sqrt() <= abs_tol {
            return Some((p, iters));
        }
        if iters >= max_iter {
            return Some((p, iters));
        }
        let bd = model.b_sym(&d) + &d.mapv(|v| t * v);
        let dbd = d.dot(&bd);
        let dd = d.dot(&d);
        if dbd < lambda1 * dd {
            return None;
        }
        let rr = r.dot(&r);
        let alpha = rr / dbd;
        p = p + &d.mapv(|v| alpha * v);
        r = r - &bd.mapv(|v| alpha * v);
        iters += 1;
        let beta = r.dot(&r) / rr;
        d = &r + &d.mapv(|v| beta * v);
    }
}

/// Outcome of the reduced semismooth-Newton solve.
pub struct ReducedStep {
    pub p: Vector,
    pub cg_iterations: usize,
    pub flagged: bool,
}

/// Solves `(B + t I) p = -g` with `B = lambda J(x)` by block elimination on
/// the active/inactive index split of the generalized Jacobian: the
/// inactive block is diagonal, `p_O = -g_O / (1 + t)`, and the active block
/// becomes the symmetric system
/// `(lambda^{-1} H_II + t I) p_I = -g_I - lambda^{-1} H_IO p_O`
/// solved by CG. `hess_apply` is one Hessian-vector product of the smooth
/// part (for the partial-DCT least squares objective: one forward and one
/// adjoint transform per call).
pub fn reduced_newton_step(
    hess_apply: &dyn Fn(&Vector) -> Vector,
    n: usize,
    lambda: f64,
    t: f64,
    g: &Vector,
    active: &[usize],
    cg_tol: f64,
    max_iter: usize,
) -> ReducedStep {
    let mut in_active = vec![false; n];
    for &i in active {
        in_active[i] = true;
    }
    let mut p: Vector = Array1::zeros(n);
    for i in 0..n {
        if !in_active[i] {
            p[i] = -g[i] / (1.0 + t);
        }
    }
    if active.is_empty() {
        return ReducedStep { p, cg_iterations: 0, flagged: false };
    }

    let scatter = |w: &Array1<f64>, idx: &[usize]| -> Vector {
        let mut full = Array1::zeros(n);
        for (k, &i) in idx.iter().enumerate() {
            full[i] = w[k];
        }
        full
    };
    let gather = |full: &Vector, idx: &[usize]| -> Array1<f64> {
        idx.iter().map(|&i| full[i]).collect()
    };

    // rhs = -g_I - lambda^{-1} H_IO p_O
    let p_o_full = {
        let mut f = p.clone();
        for &i in active {
            f[i] = 0.0;
        }
        f
    };
    let h_po = hess_apply(&p_o_full);
    let rhs: Array1<f64> = active
        .iter()
        .map(|&i| -g[i] - h_po[i] / lambda)
        .collect();

    // CG on w -> lambda^{-1} H_II w + t w; one hess_apply per iteration.
    let op = |w: &Array1<f64>| -> Array1<f64> {
        let full = scatter(w, active);
        let h = hess_apply(&full);
        let mut out = gather(&h, active).mapv(|v| v / lambda);
        out = out + &w.mapv(|v| t * v);
        out
    };

    let rhs_norm = rhs.dot(&rhs).sqrt();
    let mut w: Array1<f64> = Array1::zeros(active.len());
    let mut r = rhs.clone();
    let mut d = r.clone();
    let mut iters = 0;
    let mut flagged = false;
    while r.dot(&r).sqrt() > cg_tol * rhs_norm.max(1e-300) {
        if iters >= max_iter {
            flagged = true;
            break;
        }
        let ad = op(&d);
        let dad = d.dot(&ad);
        if dad <= 1e-14 * d.dot(&d) {
            // nonconvex or singular reduced block: stop at the current iterate
            flagged = true;
            break;
        }
        let rr = r.dot(&r);
        let alpha = rr / dad;
        w = w + &d.mapv(|v| alpha * v);
        r = r - &ad.mapv(|v| alpha * v);
        iters += 1;
        let beta = r.dot(&r) / rr;
        d = &r + &d.mapv(|v| beta * v);
    }
    for (k, &i) in active.iter().enumerate() {
        p[i] = w[k];
    }
    ReducedStep { p, cg_iterations: iters, flagged }
}

#[derive(Debug, Clone, Copy)]
pub struct QualityReport {
    pub eq36_ok: bool,
    pub eq37_ok: bool,
}

/// Checks the two solution-quality conditions: the absolute reduction bound
/// with constants `(gamma1, gamma2)` and the relative-to-Cauchy bound with
/// weight `1 - ell(||s||)`.
pub fn check_quality(
    model: &QuadraticModel,
    s: &Vector,
    s_cauchy: &Vector,
    ell: &dyn Fn(f64) -> f64,
    gamma1: f64,
    gamma2: f64,
    delta: f64,
) -> QualityReport {
    let red = model.reduction(s);
    let red_c = model.reduction(s_cauchy);
    let gnorm = model.g.dot(&model.g).sqrt();
    let slack = 1e-12 * (1.0 + red.abs());
    let eq36_ok = red + slack >= 0.5 * gamma1 * gnorm * delta.min(gamma2 * gnorm);
    let snorm = s.dot(s).sqrt();
    let eq37_ok = red + slack >= (1.0 - ell(snorm)) * red_c;
    QualityReport { eq36_ok, eq37_ok }
}
