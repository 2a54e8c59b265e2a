//! The nonsmooth convex term `phi` and its operational interface.
//!
//! Three instances are provided: `mu * ||x||_1`, the group lasso penalty
//! `mu * sum_g ||x_g||_2` over a contiguous partition, and `mu * ||x||_inf`.
//! Besides value and proximal map, each regularizer exposes the geometry
//! used by the trust-region loop: stepsize safeguards, a sparsity
//! stratification index, and a truncation operator that pushes a point into
//! a deeper stratum while moving it by at most `kappa * a`.
//!
//! The safeguard and truncation geometry depends only on the breakpoint
//! structure of `phi`, so it is independent of `mu`.

use ndarray::Array1;

use crate::error::{NtrError, Result};
use crate::problem::Vector;

/// Tolerance for detecting ties among maximum-achieving coordinates of
/// `|x|` in the l-inf case. Bit-exact ties are fragile in floating point.
pub const TIE_TOL: f64 = 1e-12;

const UNIT_TOL: f64 = 1e-8;

/// Positive diagonal metric `Lambda = diag(l_1..l_n)`; the scalar variant
/// stands for `lambda * I`.
#[derive(Debug, Clone)]
pub enum Metric {
    Scalar(f64),
    Diagonal(Vector),
}

impl Metric {
    pub fn scalar(lambda: f64) -> Self {
        assert!(lambda > 0.0, "metric must be strictly positive");
        Metric::Scalar(lambda)
    }

    pub fn at(&self, i: usize) -> f64 {
        match self {
            Metric::Scalar(l) => *l,
            Metric::Diagonal(d) => d[i],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Metric::Scalar(l) if *l > 0.0 => Ok(()),
            Metric::Scalar(_) => Err(NtrError::InvalidArgument("metric entries must be > 0".into())),
            Metric::Diagonal(d) => {
                if d.len() != n {
                    return Err(NtrError::DimensionMismatch { expected: n, got: d.len() });
                }
                if d.iter().all(|v| *v > 0.0) {
                    Ok(())
                } else {
                    Err(NtrError::InvalidArgument("metric entries must be > 0".into()))
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    L1,
    /// Contiguous index ranges partitioning `0..n`.
    GroupLasso(Vec<std::ops::Range<usize>>),
    LInf,
}

/// Convex regularizer `mu * phi_0` together with its truncation structure.
#[derive(Debug, Clone)]
pub struct Regularizer {
    mu: f64,
    dim: usize,
    kind: Kind,
    /// Group-lasso safeguard exponent in the directional bound.
    sigma: f64,
}

impl Regularizer {
    pub fn l1(mu: f64, dim: usize) -> Self {
        assert!(mu > 0.0);
        Self { mu, dim, kind: Kind::L1, sigma: 1.0 }
    }

    pub fn linf(mu: f64, dim: usize) -> Self {
        assert!(mu > 0.0);
        Self { mu, dim, kind: Kind::LInf, sigma: 1.0 }
    }

    pub fn group_lasso(mu: f64, dim: usize, groups: Vec<std::ops::Range<usize>>) -> Result<Self> {
        if mu <= 0.0 {
            return Err(NtrError::InvalidArgument("mu must be > 0".into()));
        }
        // groups must partition 0..dim contiguously
        let mut next = 0;
        for g in &groups {
            if g.start != next || g.end <= g.start {
                return Err(NtrError::InvalidArgument(format!(
                    "groups must be nonempty contiguous ranges partitioning 0..{dim}"
                )));
            }
            next = g.end;
        }
        if next != dim {
            return Err(NtrError::InvalidArgument(format!(
                "groups cover 0..{next}, expected 0..{dim}"
            )));
        }
        Ok(Self { mu, dim, kind: Kind::GroupLasso(groups), sigma: 1.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// The l1 weight, or `None` for the other regularizers. Used by the
    /// solver paths specific to sparse problems.
    pub fn l1_weight(&self) -> Option<f64> {
        matches!(self.kind, Kind::L1).then_some(self.mu)
    }

    /// Depth of the stratification `S_0 > S_1 > ... > S_m`.
    pub fn stratum_count(&self) -> usize {
        match &self.kind {
            Kind::L1 | Kind::LInf => self.dim,
            Kind::GroupLasso(gs) => gs.len(),
        }
    }

    /// Truncation displacement constant: `||T(x,a) - x|| <= kappa * a`.
    pub fn kappa(&self) -> f64 {
        (self.stratum_count() as f64).sqrt()
    }

    /// Upper bound for admissible truncation levels (here always infinite).
    pub fn delta(&self) -> f64 {
        f64::INFINITY
    }

    /// `phi(x)`.
    pub fn value(&self, x: &Vector) -> f64 {
        match &self.kind {
            Kind::L1 => self.mu * x.iter().map(|v| v.abs()).sum::<f64>(),
            Kind::GroupLasso(gs) => {
                self.mu * gs.iter().map(|g| group_norm(x, g)).sum::<f64>()
            }
            Kind::LInf => self.mu * x.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        }
    }

    /// Proximal map under a positive diagonal metric: the minimizer of
    /// `phi(y) + 1/2 ||y - z||_Lambda^2`.
    pub fn prox(&self, z: &Vector, metric: &Metric) -> Result<Vector> {
        metric.validate(z.len())?;
        let mu = self.mu;
        match &self.kind {
            Kind::L1 => Ok(Array1::from_shape_fn(z.len(), |i| {
                soft_threshold(z[i], mu / metric.at(i))
            })),
            Kind::GroupLasso(gs) => {
                let mut y = Array1::zeros(z.len());
                for g in gs {
                    let block = group_prox(z, metric, g, mu);
                    for (k, i) in g.clone().enumerate() {
                        y[i] = block[k];
                    }
                }
                Ok(y)
            }
            Kind::LInf => Ok(linf_prox(z, metric, mu)),
        }
    }

    /// Euclidean projection of `v` onto the subdifferential `d phi(x)`.
    pub fn subdiff_project(&self, x: &Vector, v: &Vector) -> Vector {
        let mu = self.mu;
        match &self.kind {
            Kind::L1 => Array1::from_shape_fn(x.len(), |i| {
                if x[i] != 0.0 {
                    mu * x[i].signum()
                } else {
                    v[i].clamp(-mu, mu)
                }
            }),
            Kind::GroupLasso(gs) => {
                let mut w = Array1::zeros(x.len());
                for g in gs {
                    let nx = group_norm(x, g);
                    if nx != 0.0 {
                        for i in g.clone() {
                            w[i] = mu * x[i] / nx;
                        }
                    } else {
                        let nv = group_norm(v, g);
                        let scale = if nv > mu { mu / nv } else { 1.0 };
                        for i in g.clone() {
                            w[i] = scale * v[i];
                        }
                    }
                }
                w
            }
            Kind::LInf => self.linf_subdiff_project(x, v),
        }
    }

    fn linf_subdiff_project(&self, x: &Vector, v: &Vector) -> Vector {
        let mu = self.mu;
        let m = max_abs(x);
        if m == 0.0 {
            // d phi(0) = mu * l1-ball
            return project_l1_ball(v, mu);
        }
        // On the face: w_i = 0 off the achieving set, and the signed entries
        // on the achieving set form a simplex of radius mu.
        let achievers: Vec<usize> =
            (0..x.len()).filter(|&i| x[i].abs() >= m - TIE_TOL).collect();
        let signed: Vec<f64> = achievers.iter().map(|&i| v[i] * x[i].signum()).collect();
        let proj = project_simplex(&signed, mu);
        let mut w = Array1::zeros(x.len());
        for (k, &i) in achievers.iter().enumerate() {
            w[i] = x[i].signum() * proj[k];
        }
        w
    }

    /// Largest `T` such that `t -> phi(x + t d)` is continuously
    /// differentiable on `(0, T)`, from the breakpoint structure of `phi`.
    /// Requires `||d|| = 1`.
    pub fn gamma_max(&self, x: &Vector, d: &Vector) -> Result<f64> {
        check_unit(d)?;
        Ok(match &self.kind {
            Kind::L1 => {
                let mut t = f64::INFINITY;
                for i in 0..x.len() {
                    if x[i] != 0.0 && d[i] != 0.0 && x[i] * d[i] < 0.0 {
                        t = t.min(-x[i] / d[i]);
                    }
                }
                t
            }
            Kind::GroupLasso(gs) => {
                let mut t = f64::INFINITY;
                for g in gs {
                    let nx = group_norm(x, g);
                    let nd = group_norm(d, g);
                    if nx == 0.0 || nd == 0.0 {
                        continue;
                    }
                    // X_g + t D_g = 0 requires D_g anti-parallel to X_g.
                    let ts = -group_dot(x, d, g) / (nd * nd);
                    if ts > 0.0 {
                        let mut res = 0.0f64;
                        for i in g.clone() {
                            res += (x[i] + ts * d[i]).powi(2);
                        }
                        if res.sqrt() <= 1e-12 * nx.max(1.0) {
                            t = t.min(ts);
                        }
                    }
                }
                t
            }
            Kind::LInf => linf_gamma_max(x, d),
        })
    }

    /// Safeguard actually used by the solver. Coincides with [`gamma_max`]
    /// for the polyhedral norms; for group lasso it is the three-way
    /// directional bound with exponent `sigma`.
    ///
    /// [`gamma_max`]: Regularizer::gamma_max
    pub fn gamma_dir(&self, x: &Vector, d: &Vector) -> Result<f64> {
        let gmax = self.gamma_max(x, d)?;
        match &self.kind {
            Kind::L1 | Kind::LInf => Ok(gmax),
            Kind::GroupLasso(gs) => {
                let mut t = gmax;
                for g in gs {
                    let nx = group_norm(x, g);
                    let nd = group_norm(d, g);
                    if nx == 0.0 || nd == 0.0 {
                        continue;
                    }
                    let theta = group_dot(x, d, g) / (nx * nd);
                    let denom1 = 1.0 - theta * theta;
                    if denom1 > 0.0 {
                        t = t.min(nx.powf(1.0 + self.sigma) / denom1);
                    }
                    let denom2 = (-2.0 * theta).max(0.0);
                    if denom2 > 0.0 {
                        t = t.min(nx / denom2);
                    }
                }
                Ok(t)
            }
        }
    }

    /// Lower bound of the safeguard over all unit directions.
    pub fn gamma(&self, x: &Vector) -> f64 {
        match &self.kind {
            Kind::L1 => {
                let m = x
                    .iter()
                    .filter(|v| **v != 0.0)
                    .fold(f64::INFINITY, |a, v| a.min(v.abs()));
                m
            }
            Kind::GroupLasso(gs) => gs
                .iter()
                .map(|g| group_norm(x, g))
                .filter(|n| *n != 0.0)
                .fold(f64::INFINITY, f64::min),
            Kind::LInf => {
                let m = max_abs(x);
                if m == 0.0 {
                    // Along any ray from the origin the achieving set is
                    // constant, so no breakpoint is ever met.
                    return f64::INFINITY;
                }
                let below = x
                    .iter()
                    .map(|v| v.abs())
                    .filter(|a| *a < m - TIE_TOL)
                    .fold(f64::NEG_INFINITY, f64::max);
                if below == f64::NEG_INFINITY {
                    2.0 * m
                } else {
                    m - below
                }
            }
        }
    }

    /// Index `i` of the stratum with `x` in `S_i \ S_{i+1}`.
    pub fn stratum_index(&self, x: &Vector) -> usize {
        match &self.kind {
            Kind::L1 => x.iter().filter(|v| **v == 0.0).count(),
            Kind::GroupLasso(gs) => {
                gs.iter().filter(|g| group_norm(x, g) == 0.0).count()
            }
            Kind::LInf => {
                let m = max_abs(x);
                if m == 0.0 {
                    return self.dim;
                }
                let achievers = x.iter().filter(|v| v.abs() >= m - TIE_TOL).count();
                achievers - 1
            }
        }
    }

    /// Truncation `T(x, a)`: identity when `Gamma(x) >= a`, otherwise a
    /// nearby point in a strictly deeper stratum with `Gamma(T(x,a)) >= a`
    /// and `||T(x,a) - x|| <= kappa * a`.
    pub fn truncate(&self, x: &Vector, a: f64) -> Result<Vector> {
        if !(a > 0.0) || a > self.delta() {
            return Err(NtrError::InvalidArgument(format!(
                "truncation level must satisfy 0 < a <= delta, got {a}"
            )));
        }
        if self.gamma(x) >= a {
            return Ok(x.clone());
        }
        Ok(match &self.kind {
            Kind::L1 => x.mapv(|v| if v.abs() < a { 0.0 } else { v }),
            Kind::GroupLasso(gs) => {
                let mut y = x.clone();
                for g in gs {
                    if group_norm(x, g) < a {
                        for i in g.clone() {
                            y[i] = 0.0;
                        }
                    }
                }
                y
            }
            Kind::LInf => self.linf_truncate(x, a),
        })
    }

    fn linf_truncate(&self, x: &Vector, a: f64) -> Vector {
        let n = x.len();
        let m = max_abs(x);
        let all_tie = m == 0.0 || x.iter().all(|v| v.abs() >= m - TIE_TOL);
        if all_tie {
            return if m >= a / 2.0 { x.clone() } else { Array1::zeros(n) };
        }
        // Lift every coordinate above the threshold to magnitude ||x||_inf.
        // Zeros that fall above the threshold (only possible for a > m) are
        // lifted with positive sign so that they join the achieving set.
        let lifted = Array1::from_shape_fn(n, |i| {
            if x[i].abs() > m - a {
                if x[i] == 0.0 {
                    m
                } else {
                    x[i].signum() * m
                }
            } else {
                x[i]
            }
        });
        // If everything now ties and the tie value is still too small, the
        // deepest stratum {0} is the only point with a large enough safeguard.
        if lifted.iter().all(|v| v.abs() >= m - TIE_TOL) && 2.0 * m < a {
            return Array1::zeros(n);
        }
        lifted
    }
}

fn check_unit(d: &Vector) -> Result<()> {
    let n = d.dot(d).sqrt();
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(NtrError::InvalidArgument(format!(
            "direction must have unit norm, got ||d|| = {n}"
        )));
    }
    Ok(())
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

fn max_abs(x: &Vector) -> f64 {
    x.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn group_norm(x: &Vector, g: &std::ops::Range<usize>) -> f64 {
    x.slice(ndarray::s![g.clone()]).dot(&x.slice(ndarray::s![g.clone()])).sqrt()
}

fn group_dot(x: &Vector, d: &Vector, g: &std::ops::Range<usize>) -> f64 {
    x.slice(ndarray::s![g.clone()]).dot(&d.slice(ndarray::s![g.clone()]))
}

/// Prox of `mu * ||.||_2` on one group under a diagonal metric. For a
/// nonzero solution the optimality system reduces to the scalar fixed point
/// `r = ||y(r)||` with `y_i(r) = l_i w_i / (l_i + mu / r)`, solved by
/// bisection.
fn group_prox(z: &Vector, metric: &Metric, g: &std::ops::Range<usize>, mu: f64) -> Vec<f64> {
    let w: Vec<f64> = g.clone().map(|i| z[i]).collect();
    let l: Vec<f64> = g.clone().map(|i| metric.at(i)).collect();
    let lw_norm: f64 = w.iter().zip(&l).map(|(wi, li)| (li * wi).powi(2)).sum::<f64>().sqrt();
    if lw_norm <= mu {
        return vec![0.0; w.len()];
    }
    let norm_at = |r: f64| -> f64 {
        w.iter()
            .zip(&l)
            .map(|(wi, li)| (li * wi / (li + mu / r)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (mut lo, mut hi) = (0.0f64, w_norm);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    w.iter().zip(&l).map(|(wi, li)| li * wi / (li + mu / r)).collect()
}

/// Prox of `mu * ||.||_inf` under a diagonal metric via the dual problem:
/// shrink `a = Lambda z` onto the l1-ball of radius `mu` in the
/// `Lambda^{-1}` norm (coordinatewise shrink by `nu * l_i`, with `nu` from
/// bisection), then `y = z - Lambda^{-1} w`.
fn linf_prox(z: &Vector, metric: &Metric, mu: f64) -> Vector {
    let n = z.len();
    let a: Vec<f64> = (0..n).map(|i| metric.at(i) * z[i]).collect();
    let l1: f64 = a.iter().map(|v| v.abs()).sum();
    if l1 <= mu {
        return Array1::zeros(n);
    }
    let sum_at = |nu: f64| -> f64 {
        (0..n).map(|i| (a[i].abs() - nu * metric.at(i)).max(0.0)).sum()
    };
    let mut hi = (0..n).map(|i| a[i].abs() / metric.at(i)).fold(0.0f64, f64::max);
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) > mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    Array1::from_shape_fn(n, |i| {
        let wi = a[i].signum() * (a[i].abs() - nu * metric.at(i)).max(0.0);
        z[i] - wi / metric.at(i)
    })
}

/// Euclidean projection onto the simplex `{u >= 0, sum u = r}` (sort-based).
fn project_simplex(u: &[f64], r: f64) -> Vec<f64> {
    let mut sorted = u.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in sorted.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - r) / (j as f64 + 1.0);
        if uj - t > 0.0 {
            theta = t;
        }
    }
    u.iter().map(|&ui| (ui - theta).max(0.0)).collect()
}

/// Euclidean projection onto the l1-ball of radius `r`.
fn project_l1_ball(v: &Vector, r: f64) -> Vector {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= r {
        return v.clone();
    }
    let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let proj = project_simplex(&abs, r);
    Array1::from_shape_fn(v.len(), |i| v[i].signum() * proj[i])
}

/// `Gamma_max` for the l-inf norm: the first `t > 0` at which the slope of
/// `t -> max_i |x_i + t d_i|` changes. Candidate breakpoints are the
/// pairwise crossings `|x_i + t d_i| = |x_j + t d_j|` and the zero
/// crossings; the piecewise-linear slope is compared across the resulting
/// intervals.
fn linf_gamma_max(x: &Vector, d: &Vector) -> f64 {
    let n = x.len();
    let mut cand: Vec<f64> = Vec::new();
    let mut push = |t: f64| {
        if t.is_finite() && t > 0.0 {
            cand.push(t);
        }
    };
    for i in 0..n {
        if d[i] != 0.0 {
            push(-x[i] / d[i]);
        }
        for j in (i + 1)..n {
            let dd = d[i] - d[j];
            if dd != 0.0 {
                push((x[j] - x[i]) / dd);
            }
            let ds = d[i] + d[j];
            if ds != 0.0 {
                push(-(x[i] + x[j]) / ds);
            }
        }
    }
    if cand.is_empty() {
        return f64::INFINITY;
    }
    cand.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cand.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));

    let ray_max = |t: f64| -> f64 {
        (0..n).map(|i| (x[i] + t * d[i]).abs()).fold(f64::NEG_INFINITY, f64::max)
    };
    let interval_slope = |a: f64, b: f64| -> f64 {
        let t1 = a + 0.25 * (b - a);
        let t2 = a + 0.75 * (b - a);
        (ray_max(t2) - ray_max(t1)) / (t2 - t1)
    };

    let first_slope = interval_slope(0.0, cand[0]);
    for k in 0..cand.len() {
        let next = if k + 1 < cand.len() { cand[k + 1] } else { cand[k] + 1.0 + cand[k] };
        let s = interval_slope(cand[k], next);
        if (s - first_slope).abs() > 1e-9 * (1.0 + first_slope.abs()) {
            return cand[k];
        }
    }
    f64::INFINITY
}
