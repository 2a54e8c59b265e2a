//! Accelerated proximal gradient baseline with the same stopping measure
//! as the trust-region solver.

use serde::Serialize;

use crate::error::Result;
use crate::problem::{CompositeProblem, Vector};
use crate::regularizers::Metric;
use crate::solver::SolveStatus;

#[derive(Debug, Serialize)]
pub struct FistaReport {
    pub status: SolveStatus,
    pub final_x: Vec<f64>,
    pub final_objective: f64,
    pub final_residual: f64,
    pub iterations: usize,
    pub operator_calls: u64,
    /// Operator calls spent inside the main loop (gradient steps only);
    /// the remainder is objective/stopping bookkeeping.
    pub loop_operator_calls: u64,
    pub residuals: Vec<f64>,
    /// Running best objective per iteration (nonincreasing), only filled
    /// when objective tracking is on.
    pub best_objectives: Vec<f64>,
    pub wall_time_s: f64,
}

/// FISTA with constant stepsize `1/l` (no restarts). The stopping residual
/// `l * ||y - prox(y - grad/l)||` is a byproduct of the gradient step, so
/// the main loop costs exactly one forward and one adjoint operator call
/// per iteration. With `track_objective` the objective is evaluated at
/// every iterate (one extra call each) and the running best is recorded.
pub fn fista(
    problem: &CompositeProblem,
    l: f64,
    eps_stop: f64,
    max_iter: usize,
    track_objective: bool,
) -> Result<FistaReport> {
    let start = std::time::Instant::now();
    let reg = &problem.regularizer;
    let metric = Metric::scalar(l);

    let mut x = Vector::zeros(problem.dim());
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut status = SolveStatus::MaxIterations;
    let mut residuals = Vec::new();
    let mut best_objectives = Vec::new();
    let mut best = f64::INFINITY;
    let mut best_x = x.clone();
    let mut loop_calls = 0u64;
    let mut iterations = 0;
    let mut final_residual = f64::NAN;

    for k in 0..max_iter {
        let before = problem.smooth.operator_calls();
        let grad = problem.grad_f(&y)?;
        let z = &y - &grad.mapv(|v| v / l);
        let x_next = reg.prox(&z, &metric)?;
        loop_calls += problem.smooth.operator_calls() - before;

        let f_nat = &y - &x_next;
        let residual = l * f_nat.dot(&f_nat).sqrt();
        residuals.push(residual);
        final_residual = residual;

        if track_objective {
            let psi = problem.eval_psi(&x_next)?;
            if psi < best {
                best = psi;
                best_x = x_next.clone();
            }
            best_objectives.push(best);
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_next + &(&x_next - &x).mapv(|v| (t - 1.0) / t_next * v);
        x = x_next;
        t = t_next;
        iterations = k + 1;

        if residual <= eps_stop {
            status = SolveStatus::Converged;
            break;
        }
    }

    let (final_x, final_objective) = if track_objective && best.is_finite() {
        (best_x, best)
    } else {
        let psi = problem.eval_psi(&x)?;
        (x, psi)
    };
    Ok(FistaReport {
        status,
        final_x: final_x.to_vec(),
        final_objective,
        final_residual,
        iterations,
        operator_calls: problem.smooth.operator_calls(),
        loop_operator_calls: loop_calls,
        residuals,
        best_objectives,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
