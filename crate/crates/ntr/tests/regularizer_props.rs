//! Property suites for the three regularizers: prox optimality against
//! the subgradient inequality, prox values against brute-force
//! minimization, subdifferential projection, the truncation contract, the
//! safeguard path, and mu-invariance of the geometry.

mod common;

use common::*;
use ndarray::{array, Array1};
use ntr::regularizers::{Metric, Regularizer};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn all_kinds(mu: f64, n: usize) -> Vec<Regularizer> {
    // two contiguous groups splitting the coordinates
    let split = (n / 2).max(1);
    vec![
        Regularizer::l1(mu, n),
        Regularizer::group_lasso(mu, n, vec![0..split, split..n]).unwrap(),
        Regularizer::linf(mu, n),
    ]
}

/// Random point with exact zeros and (sometimes) exact magnitude ties, so
/// every stratum of each regularizer gets exercised.
fn structured_point(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    let mut x = random_vector(r, n, scale);
    for v in x.iter_mut() {
        if r.gen::<f64>() < 0.3 {
            *v = 0.0;
        }
    }
    if n >= 2 && r.gen::<f64>() < 0.3 {
        let m = x.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let i = r.gen_range(0..n);
        x[i] = if r.gen::<f64>() < 0.5 { m } else { -m };
    }
    x
}

fn random_metric(r: &mut ChaCha8Rng, n: usize) -> (Metric, Vec<f64>) {
    if r.gen::<f64>() < 0.5 {
        let l = 0.1 + 5.0 * r.gen::<f64>();
        (Metric::scalar(l), vec![l; n])
    } else {
        let d: Vec<f64> = (0..n).map(|_| 0.1 + 5.0 * r.gen::<f64>()).collect();
        (Metric::Diagonal(Array1::from(d.clone())), d)
    }
}

/// A sample from d phi(x) built from the explicit set descriptions of each
/// regularizer; `kind` indexes into [`all_kinds`] (0 = l1, 1 = group
/// lasso over two halves, 2 = l-infinity).
fn sample_subdiff(r: &mut ChaCha8Rng, reg: &Regularizer, x: &Vector, kind: usize) -> Vector {
    let mu = reg.mu();
    let n = x.len();
    if kind == 0 {
        return sample_l1_subdiff(r, x, mu);
    }
    if kind == 2 {
        // l-infinity: convex hull of mu * sign(x_i) e_i over max achievers;
        // at zero the whole mu-radius l1 ball
        let m = x.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if m == 0.0 {
            let raw = random_vector(r, n, 1.0);
            let l1: f64 = raw.iter().map(|v| v.abs()).sum();
            let radius = mu * r.gen::<f64>();
            return raw.mapv(|v| v * radius / l1.max(1e-300));
        }
        let achievers: Vec<usize> =
            (0..n).filter(|&i| x[i].abs() >= m - 1e-12).collect();
        let mut theta: Vec<f64> = achievers.iter().map(|_| r.gen::<f64>()).collect();
        let sum: f64 = theta.iter().sum();
        for t in theta.iter_mut() {
            *t /= sum;
        }
        let mut w = Array1::zeros(n);
        for (k, &i) in achievers.iter().enumerate() {
            w[i] = mu * theta[k] * x[i].signum();
        }
        return w;
    }
    // group lasso over two contiguous halves (matches all_kinds)
    let split = (n / 2).max(1);
    let mut w = Array1::zeros(n);
    for g in [0..split, split..n] {
        let norm: f64 = g.clone().map(|i| x[i] * x[i]).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in g {
                w[i] = mu * x[i] / norm;
            }
        } else {
            let len = g.len();
            if len > 0 {
                let raw = random_vector(r, len, 1.0);
                let nr = raw.dot(&raw).sqrt().max(1e-300);
                let radius = mu * r.gen::<f64>();
                for (k, i) in g.enumerate() {
                    w[i] = raw[k] * radius / nr;
                }
            }
        }
    }
    w
}

#[test]
fn prox_satisfies_subgradient_inequality() {
    let mut r = rng(11);
    for case in 0..500 {
        let n = 2 + case % 5;
        let mu = 0.1 + 2.0 * r.gen::<f64>();
        let reg = &all_kinds(mu, n)[case % 3];
        let z = random_vector(&mut r, n, 3.0);
        let (metric, lam) = random_metric(&mut r, n);
        let y = reg.prox(&z, &metric).unwrap();
        // phi(p) >= phi(y) + <Lambda (z - y), p - y> for any probe p
        for _ in 0..50 {
            let p = &y + &random_vector(&mut r, n, 2.0);
            let inner: f64 = (0..n)
                .map(|i| lam[i] * (z[i] - y[i]) * (p[i] - y[i]))
                .sum();
            assert!(
                reg.value(&p) >= reg.value(&y) + inner - 1e-10,
                "prox optimality violated: case {case}"
            );
        }
    }
}

#[test]
fn l1_prox_matches_brute_force() {
    let mut r = rng(12);
    for _ in 0..60 {
        let n = 1 + r.gen_range(0..6);
        let mu = 0.1 + 2.0 * r.gen::<f64>();
        let reg = Regularizer::l1(mu, n);
        let z = random_vector(&mut r, n, 3.0);
        let (metric, lam) = random_metric(&mut r, n);
        let y = reg.prox(&z, &metric).unwrap();
        let brute = brute_prox_l1(&z, mu, &lam);
        for i in 0..n {
            assert!((y[i] - brute[i]).abs() <= 1e-6, "{} vs {}", y[i], brute[i]);
        }
    }
}

#[test]
fn linf_prox_matches_brute_force() {
    let mut r = rng(13);
    for _ in 0..60 {
        let mu = 0.1 + 2.0 * r.gen::<f64>();
        let reg = Regularizer::linf(mu, 2);
        let z = random_vector(&mut r, 2, 3.0);
        let (metric, lam) = random_metric(&mut r, 2);
        let y = reg.prox(&z, &metric).unwrap();
        let brute = brute_prox_linf_2d(&z, mu, &lam);
        for i in 0..2 {
            assert!((y[i] - brute[i]).abs() <= 1e-6, "{} vs {}", y[i], brute[i]);
        }
    }
}

#[test]
fn group_prox_matches_brute_force() {
    let mut r = rng(14);
    for _ in 0..60 {
        let mu = 0.1 + 2.0 * r.gen::<f64>();
        let reg = Regularizer::group_lasso(mu, 2, vec![0..2]).unwrap();
        let z = random_vector(&mut r, 2, 3.0);
        let (metric, lam) = random_metric(&mut r, 2);
        let y = reg.prox(&z, &metric).unwrap();
        let brute = brute_prox_group_2d(&z, mu, &lam);
        for i in 0..2 {
            assert!((y[i] - brute[i]).abs() <= 1e-6, "{} vs {}", y[i], brute[i]);
        }
    }
}

#[test]
fn subdiff_projection_is_nearest_point() {
    let mut r = rng(15);
    for case in 0..150 {
        let n = 2 + case % 5;
        let mu = 0.1 + 2.0 * r.gen::<f64>();
        let reg = &all_kinds(mu, n)[case % 3];
        let x = structured_point(&mut r, n, 2.0);
        let v = random_vector(&mut r, n, 3.0);
        let w = reg.subdiff_project(&x, &v);
        // projection characterization: <v - w, u - w> <= 0 for all u in the set
        for _ in 0..50 {
            let u = sample_subdiff(&mut r, reg, &x, case % 3);
            let inner = (&v - &w).dot(&(&u - &w));
            assert!(inner <= 1e-10, "projection inner product {inner}");
        }
        // membership: w is itself a subgradient of phi at x
        for _ in 0..10 {
            let p = &x + &random_vector(&mut r, n, 2.0);
            assert!(reg.value(&p) >= reg.value(&x) + w.dot(&(&p - &x)) - 1e-10);
        }
    }
}

pub fn truncation_contract_cases(reg: &Regularizer, kappa: f64, cases: usize, seed: u64) {
    let mut r = rng(seed);
    let n = reg.dim();
    for case in 0..cases {
        let x = structured_point(&mut r, n, 2.0);
        let a = 3.0 * r.gen::<f64>() + 1e-6;
        let t = reg.truncate(&x, a).unwrap();
        if reg.gamma(&x) >= a {
            assert_eq!(t, x, "truncation must be the identity above the level");
        } else {
            assert!(
                reg.stratum_index(&t) >= reg.stratum_index(&x) + 1,
                "case {case}: stratum did not deepen"
            );
            assert!(reg.gamma(&t) >= a, "case {case}: level not reached");
            let disp = (&t - &x).mapv(|v| v * v).sum().sqrt();
            assert!(disp <= kappa * a + 1e-12, "case {case}: moved {disp} > kappa*a");
        }
    }
}

#[test]
fn truncation_contract_l1() {
    let n = 5;
    truncation_contract_cases(&Regularizer::l1(1.0, n), (n as f64).sqrt(), 1000, 21);
}

#[test]
fn truncation_contract_group_lasso() {
    let reg = Regularizer::group_lasso(1.0, 6, vec![0..2, 2..4, 4..6]).unwrap();
    truncation_contract_cases(&reg, 3f64.sqrt(), 1000, 22);
}

#[test]
fn truncation_contract_linf() {
    let n = 5;
    truncation_contract_cases(&Regularizer::linf(1.0, n), (n as f64).sqrt(), 1000, 23);
}

#[test]
fn truncation_known_values() {
    let reg = Regularizer::l1(1.0, 2);
    let x = array![1.0, 2.0];
    assert_eq!(reg.truncate(&x, 0.5).unwrap(), array![1.0, 2.0]);
    assert_eq!(reg.truncate(&x, 1.5).unwrap(), array![0.0, 2.0]);
    assert_eq!(reg.truncate(&x, 2.5).unwrap(), array![0.0, 0.0]);
    // stratum indices along the same path
    assert_eq!(reg.stratum_index(&array![1.0, 2.0]), 0);
    assert_eq!(reg.stratum_index(&array![0.0, 2.0]), 1);
    // l-infinity: lift near-achievers to the max magnitude
    let reg = Regularizer::linf(1.0, 3);
    let t = reg.truncate(&array![3.0, 2.5, 1.0], 1.0).unwrap();
    assert_eq!(t, array![3.0, 3.0, 1.0]);
    assert!(reg.gamma(&t) >= 1.0);
    assert_eq!(Regularizer::linf(1.0, 3).stratum_index(&array![2.0, 2.0, 1.0]), 1);
}

#[test]
fn directional_derivative_has_no_kink_inside_safeguard() {
    let mut r = rng(31);
    let mut tested = 0usize;
    while tested < 500 {
        let n = 2 + tested % 5;
        let reg = &all_kinds(1.0 + r.gen::<f64>(), n)[tested % 3];
        let x = structured_point(&mut r, n, 2.0);
        let d = random_unit(&mut r, n);
        let gmax = reg.gamma_max(&x, &d).unwrap();
        if gmax < 1e-3 {
            continue;
        }
        tested += 1;
        let span = gmax.min(10.0);
        // a derivative jump is invariant under the step size while smooth
        // curvature scales linearly with it, so compare the one-sided
        // difference gap at two step sizes
        let h1 = 1e-4 * span;
        let h2 = h1 / 16.0;
        for j in 1..=100 {
            let t = span * j as f64 / 102.0;
            let phi_at = |t: f64| reg.value(&(&x + &d.mapv(|v| t * v)));
            let gap = |h: f64| (phi_at(t + h) - 2.0 * phi_at(t) + phi_at(t - h)) / h;
            let scale = 1.0 + (phi_at(t + h1) - phi_at(t)).abs() / h1;
            assert!(
                gap(h2).abs() <= 1e-6 * scale + 0.5 * gap(h1).abs(),
                "kink inside (0, gamma_max): t={t}, jump {}",
                gap(h2).abs()
            );
        }
    }
}

#[test]
fn geometry_is_mu_invariant() {
    let mut r = rng(32);
    for case in 0..100 {
        let n = 2 + case % 5;
        let small = all_kinds(0.3, n);
        let large = all_kinds(7.0, n);
        let x = structured_point(&mut r, n, 2.0);
        let d = random_unit(&mut r, n);
        for (a, b) in small.iter().zip(&large) {
            assert_eq!(a.gamma(&x), b.gamma(&x));
            assert_eq!(a.gamma_max(&x, &d).unwrap(), b.gamma_max(&x, &d).unwrap());
            assert_eq!(a.stratum_index(&x), b.stratum_index(&x));
            // value and prox do scale with mu
            assert!((b.value(&x) - 7.0 / 0.3 * a.value(&x)).abs() <= 1e-9 * (1.0 + a.value(&x)));
        }
    }
}
