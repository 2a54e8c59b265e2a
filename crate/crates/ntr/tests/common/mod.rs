//! Independent oracles used by the property suites: brute-force proximal
//! maps, dense transforms, dense linear solves, and spectrum helpers. None
//! of these share code with the library paths they verify.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Vector = Array1<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    (0..n).map(|_| (r.gen::<f64>() * 2.0 - 1.0) * scale).collect()
}

pub fn random_unit(r: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let v = random_vector(r, n, 1.0);
        let norm = v.dot(&v).sqrt();
        if norm > 1e-3 {
            return v.mapv(|x| x / norm);
        }
    }
}

/// Minimizes a 1-D convex function by golden-section search over
/// [lo, hi].
pub fn golden_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Brute-force prox of a separable absolute-value term: coordinatewise 1-D
/// golden-section minimization of mu|y| + lam/2 (y - z)^2.
pub fn brute_prox_l1(z: &Vector, mu: f64, lam: &[f64]) -> Vector {
    z.iter()
        .enumerate()
        .map(|(i, &zi)| {
            let l = lam[i];
            let obj = |y: f64| mu * y.abs() + 0.5 * l * (y - zi) * (y - zi);
            let span = zi.abs() + mu / l + 1.0;
            golden_min(&obj, -span, span, 200)
        })
        .collect()
}

/// Brute-force 2-D prox of `mu * max(|y1|, |y2|)` under a diagonal metric,
/// by exhausting the stationarity cases: the minimizer either leaves one
/// coordinate untouched (the max is the other), or ties both magnitudes.
/// Every candidate is scored under the true objective, so invalid
/// configurations are harmless.
pub fn brute_prox_linf_2d(z: &Vector, mu: f64, lam: &[f64]) -> Vector {
    assert_eq!(z.len(), 2);
    let obj = |y: &Vector| {
        mu * y[0].abs().max(y[1].abs())
            + 0.5 * lam[0] * (y[0] - z[0]) * (y[0] - z[0])
            + 0.5 * lam[1] * (y[1] - z[1]) * (y[1] - z[1])
    };
    let mut candidates: Vec<Vector> = Vec::new();
    // max attained by coordinate c alone: the other stays at z, c solves a
    // 1-D absolute-value prox
    for c in 0..2 {
        let o = 1 - c;
        let f1 = |t: f64| mu * t.abs() + 0.5 * lam[c] * (t - z[c]) * (t - z[c]);
        let span = z[c].abs() + mu / lam[c] + 1.0;
        let tc = golden_min(&f1, -span, span, 200);
        let mut y = Array1::zeros(2);
        y[c] = tc;
        y[o] = z[o];
        candidates.push(y);
    }
    // tied magnitudes |y1| = |y2| = t, all four sign patterns
    let span = z[0].abs().max(z[1].abs()) + 1.0;
    for s0 in [-1.0, 1.0] {
        for s1 in [-1.0, 1.0] {
            let f1 = |t: f64| {
                let y = ndarray::array![s0 * t, s1 * t];
                obj(&y)
            };
            let t = golden_min(&f1, 0.0, span, 200);
            candidates.push(ndarray::array![s0 * t, s1 * t]);
        }
    }
    candidates.push(Array1::zeros(2));
    candidates
        .into_iter()
        .min_by(|a, b| obj(a).partial_cmp(&obj(b)).unwrap())
        .unwrap()
}

/// Brute-force 2-D prox of `mu * ||y||_2` under a diagonal metric. Away
/// from zero the stationarity condition gives `y_i = lam_i z_i /
/// (lam_i + mu / r)` with `r = ||y||`; the fixed point in `r` is found by
/// bisection, and `y = 0` is checked separately.
pub fn brute_prox_group_2d(z: &Vector, mu: f64, lam: &[f64]) -> Vector {
    assert_eq!(z.len(), 2);
    let obj = |y: &Vector| {
        mu * y.dot(y).sqrt()
            + 0.5 * lam[0] * (y[0] - z[0]) * (y[0] - z[0])
            + 0.5 * lam[1] * (y[1] - z[1]) * (y[1] - z[1])
    };
    let y_of_r = |r: f64| -> Vector {
        (0..2)
            .map(|i| lam[i] * z[i] / (lam[i] + mu / r))
            .collect()
    };
    let gap = |r: f64| {
        let y = y_of_r(r);
        y.dot(&y).sqrt() - r
    };
    let mut best: Vector = Array1::zeros(2);
    let hi0 = z.dot(z).sqrt();
    if hi0 > 0.0 && gap(hi0) < 0.0 {
        let (mut lo, mut hi) = (1e-12 * hi0, hi0);
        if gap(lo) > 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if gap(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let y = y_of_r(0.5 * (lo + hi));
            if obj(&y) < obj(&best) {
                best = y;
            }
        }
    }
    best
}

/// Dense orthonormal DCT-II matrix, row k, column j.
pub fn dense_dct_matrix(n: usize) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    for k in 0..n {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for j in 0..n {
            m[[k, j]] =
                scale * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n as f64).cos();
        }
    }
    m
}

/// Dense solve of M y = b by Gaussian elimination with partial pivoting.
pub fn dense_solve(m: &Array2<f64>, b: &Vector) -> Vector {
    let n = b.len();
    let mut a = m.clone();
    let mut y = b.clone();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[[r, col]].abs() > a[[piv, col]].abs() {
                piv = r;
            }
        }
        if piv != col {
            for c in 0..n {
                let t = a[[col, c]];
                a[[col, c]] = a[[piv, c]];
                a[[piv, c]] = t;
            }
            y.swap(col, piv);
        }
        let diag = a[[col, col]];
        assert!(diag.abs() > 1e-300, "singular dense system");
        for r in col + 1..n {
            let f = a[[r, col]] / diag;
            for c in col..n {
                a[[r, c]] -= f * a[[col, c]];
            }
            y[r] -= f * y[col];
        }
    }
    let mut x: Vector = Array1::zeros(n);
    for r in (0..n).rev() {
        let mut s = y[r];
        for c in r + 1..n {
            s -= a[[r, c]] * x[c];
        }
        x[r] = s / a[[r, r]];
    }
    x
}

/// Random SPD matrix with a known spectrum: Q diag(eigs) Q^T with Q from
/// composed Givens rotations.
pub fn spd_with_spectrum(r: &mut ChaCha8Rng, eigs: &[f64]) -> Array2<f64> {
    let n = eigs.len();
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        m[[i, i]] = eigs[i];
    }
    for _ in 0..3 * n {
        let i = r.gen_range(0..n);
        let mut j = r.gen_range(0..n);
        if i == j {
            j = (j + 1) % n;
        }
        let theta: f64 = r.gen::<f64>() * std::f64::consts::PI;
        let (c, s) = (theta.cos(), theta.sin());
        // m <- G^T m G for the (i, j) rotation
        for col in 0..n {
            let (a, b) = (m[[i, col]], m[[j, col]]);
            m[[i, col]] = c * a - s * b;
            m[[j, col]] = s * a + c * b;
        }
        for row in 0..n {
            let (a, b) = (m[[row, i]], m[[row, j]]);
            m[[row, i]] = c * a - s * b;
            m[[row, j]] = s * a + c * b;
        }
    }
    m
}

pub fn mat_apply(m: &Array2<f64>, v: &Vector) -> Vector {
    let n = m.nrows();
    (0..n)
        .map(|i| (0..m.ncols()).map(|j| m[[i, j]] * v[j]).sum())
        .collect()
}

/// Operator norm of a symmetric matrix by power iteration.
pub fn power_norm(m: &Array2<f64>, iters: usize, seed: u64) -> f64 {
    let n = m.nrows();
    let mut r = rng(seed);
    let mut v = random_unit(&mut r, n);
    let mut lam = 0.0;
    for _ in 0..iters {
        let w = mat_apply(m, &v);
        lam = w.dot(&w).sqrt();
        if lam == 0.0 {
            return 0.0;
        }
        v = w.mapv(|x| x / lam);
    }
    lam
}

/// A sample from the l1 subdifferential mu * d||x||_1 at x: fixed signs on
/// the support, uniform in [-mu, mu] elsewhere.
pub fn sample_l1_subdiff(r: &mut ChaCha8Rng, x: &Vector, mu: f64) -> Vector {
    x.iter()
        .map(|&xi| {
            if xi != 0.0 {
                mu * xi.signum()
            } else {
                mu * (r.gen::<f64>() * 2.0 - 1.0)
            }
        })
        .collect()
}

/// dist(0, grad f(x) + mu * d||x||_1) for small n by brute-force grid over
/// the box part of the subdifferential, refined coordinatewise (the
/// distance is separable for the l1 box).
pub fn brute_dist_l1_stationarity(grad: &Vector, x: &Vector, mu: f64) -> f64 {
    // separable: per coordinate the closest subgradient is the clamp
    let mut sq = 0.0;
    for i in 0..x.len() {
        let gi = grad[i];
        let wi = if x[i] != 0.0 {
            mu * x[i].signum()
        } else {
            (-gi).clamp(-mu, mu)
        };
        sq += (gi + wi) * (gi + wi);
    }
    sq.sqrt()
}
