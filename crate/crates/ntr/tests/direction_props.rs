//! Properties of the pseudo-gradients: descent along the produced
//! direction, minimum-norm subgradient identity against brute force, and
//! agreement of the criticality measures.

mod common;

use common::*;
use ndarray::{array, Array1};
use ntr::directions::{
    natural_residual, normal_map_g, pseudo_gradient, stopping_residual, PseudoGradientKind,
};
use ntr::problem::{CompositeProblem, QuadraticOracle};
use ntr::regularizers::{Metric, Regularizer};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// f = 1/2 x'Qx + c'x with a random SPD Q, phi = mu ||x||_1.
fn random_problem(r: &mut ChaCha8Rng, n: usize, mu: f64) -> CompositeProblem {
    let eigs: Vec<f64> = (0..n).map(|_| 0.2 + 4.0 * r.gen::<f64>()).collect();
    let q = spd_with_spectrum(r, &eigs);
    let rows: Vec<Vector> = (0..n)
        .map(|i| (0..n).map(|j| q[[i, j]]).collect())
        .collect();
    let c = random_vector(r, n, 2.0);
    CompositeProblem::new(
        Box::new(QuadraticOracle::new(rows, c)),
        Regularizer::l1(mu, n),
    )
    .unwrap()
}

#[test]
fn pseudo_gradients_are_descent_directions() {
    let mut r = rng(41);
    let kinds = [
        PseudoGradientKind::NormalMap,
        PseudoGradientKind::NaturalResidual(1.5),
        PseudoGradientKind::ScaledNaturalResidual(1.3),
    ];
    let mut tested = 0usize;
    while tested < 200 {
        let n = 2 + tested % 4;
        let mu = 0.3 + r.gen::<f64>();
        let problem = random_problem(&mut r, n, mu);
        let mut x = random_vector(&mut r, n, 2.0);
        for v in x.iter_mut() {
            if r.gen::<f64>() < 0.3 {
                *v = 0.0;
            }
        }
        let out = pseudo_gradient(&problem, &x, kinds[tested % 3]).unwrap();
        if out.u > -1e-6 {
            continue; // (near-)stationary point, nothing to check
        }
        tested += 1;
        // g = u d decomposition with unit d
        let dn = out.d.dot(&out.d).sqrt();
        assert!((dn - 1.0).abs() <= 1e-12);
        for i in 0..n {
            assert!((out.g[i] - out.u * out.d[i]).abs() <= 1e-12 * (1.0 + out.g[i].abs()));
        }
        // numerical directional derivative at t = 1e-7 is at most u
        let t = 1e-7;
        let psi = |y: &Vector| problem.eval_psi(y).unwrap();
        let dd = (psi(&(&x + &out.d.mapv(|v| t * v))) - psi(&x)) / t;
        assert!(
            dd <= out.u + 1e-4 * (1.0 + out.u.abs()),
            "directional derivative {dd} exceeds u {}",
            out.u
        );
    }
}

#[test]
fn normal_map_gives_minimum_norm_subgradient() {
    let mut r = rng(42);
    for case in 0..300 {
        let n = 1 + case % 3;
        let mu = 0.3 + r.gen::<f64>();
        let problem = random_problem(&mut r, n, mu);
        let mut x = random_vector(&mut r, n, 2.0);
        for v in x.iter_mut() {
            if r.gen::<f64>() < 0.4 {
                *v = 0.0;
            }
        }
        let out = normal_map_g(&problem, &x).unwrap();
        let gnorm = out.g.dot(&out.g).sqrt();
        let grad = problem.grad_f(&x).unwrap();
        let brute = brute_dist_l1_stationarity(&grad, &x, mu);
        assert!((gnorm - brute).abs() <= 1e-8, "{gnorm} vs {brute}");
        // membership: g - grad f is a subgradient of phi at x
        let w = &out.g - &grad;
        for i in 0..n {
            if x[i] != 0.0 {
                assert!((w[i] - mu * x[i].signum()).abs() <= 1e-10);
            } else {
                assert!(w[i].abs() <= mu + 1e-10);
            }
        }
    }
}

#[test]
fn criticality_measures_agree() {
    let mut r = rng(43);
    for case in 0..100 {
        let n = 2 + case % 3;
        let mu = 0.5;
        // f = 1/2 ||x - c||^2: the unique stationary point is the
        // soft-threshold of c
        let c = random_vector(&mut r, n, 2.0);
        let problem = CompositeProblem::new(
            Box::new(QuadraticOracle::shifted_identity(&c)),
            Regularizer::l1(mu, n),
        )
        .unwrap();
        let star = Regularizer::l1(mu, n)
            .prox(&c, &Metric::scalar(1.0))
            .unwrap();
        for lambda in [0.5, 1.0, 3.0] {
            let f = natural_residual(&problem, &star, lambda).unwrap();
            assert!(f.dot(&f).sqrt() <= 1e-12);
        }
        assert!(normal_map_g(&problem, &star).unwrap().is_zero());
        assert!(stopping_residual(&problem, &star, 1.0).unwrap() <= 1e-12);
        // a perturbed point is flagged by both measures
        let off = &star + &random_unit(&mut r, n).mapv(|v| 0.3 * v);
        let f = natural_residual(&problem, &off, 1.0).unwrap();
        let nm = normal_map_g(&problem, &off).unwrap();
        assert!(f.dot(&f).sqrt() > 1e-8);
        assert!(!nm.is_zero());
    }
}

#[test]
fn natural_residual_closed_forms() {
    // f = 1/2 ||x - c||^2 with c = (-2, 0): grad f(0) = (2, 0), so the
    // prox argument is (-2, 0) and soft-thresholding leaves (-1, 0)
    let problem = CompositeProblem::new(
        Box::new(QuadraticOracle::shifted_identity(&array![-2.0, 0.0])),
        Regularizer::l1(1.0, 2),
    )
    .unwrap();
    let f = natural_residual(&problem, &array![0.0, 0.0], 1.0).unwrap();
    assert!((f[0] - 1.0).abs() <= 1e-14 && f[1].abs() <= 1e-14);
    assert!((stopping_residual(&problem, &array![0.0, 0.0], 1.0).unwrap() - 1.0).abs() <= 1e-14);

    // f identically zero: the prox of a sub-threshold point is the origin
    let zero = QuadraticOracle::new(
        vec![array![0.0, 0.0], array![0.0, 0.0]],
        array![0.0, 0.0],
    );
    let problem = CompositeProblem::new(Box::new(zero), Regularizer::l1(1.0, 2)).unwrap();
    let f = natural_residual(&problem, &array![0.5, 0.0], 1.0).unwrap();
    assert_eq!(f, array![0.5, 0.0]);

    // the scaled kind is exactly lambda times the natural residual
    let mut r = rng(44);
    for _ in 0..20 {
        let problem = random_problem(&mut r, 3, 0.7);
        let x = random_vector(&mut r, 3, 2.0);
        for lambda in [0.3, 1.0, 2.0] {
            let f = natural_residual(&problem, &x, lambda).unwrap();
            let g = pseudo_gradient(&problem, &x, PseudoGradientKind::ScaledNaturalResidual(lambda))
                .unwrap()
                .g;
            for i in 0..3 {
                assert!((g[i] - lambda * f[i]).abs() <= 1e-12 * (1.0 + f[i].abs()));
            }
        }
    }
}

#[test]
fn stopping_residual_scaling_matches_brute_prox() {
    // with f = 0 the residual is lambda * ||x - prox(x)||; cross-check the
    // prox against coordinatewise golden-section minimization
    let mut r = rng(45);
    for _ in 0..30 {
        let n = 3;
        let zero = QuadraticOracle::new(
            (0..n).map(|_| Array1::zeros(n)).collect(),
            Array1::zeros(n),
        );
        let mu = 0.2 + r.gen::<f64>();
        let problem = CompositeProblem::new(Box::new(zero), Regularizer::l1(mu, n)).unwrap();
        let x = random_vector(&mut r, n, 2.0);
        for lambda in [0.5, 2.0] {
            let p = brute_prox_l1(&x, mu, &vec![lambda; n]);
            let expected = lambda * (&x - &p).mapv(|v| v * v).sum().sqrt();
            let got = stopping_residual(&problem, &x, lambda).unwrap();
            assert!((got - expected).abs() <= 1e-5 * (1.0 + expected));
        }
    }
}
