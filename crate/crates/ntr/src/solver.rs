//! The trust-region loop with stepsize safeguards and truncation.
//!
//! One iteration: build the quadratic model from a pseudo-gradient and a
//! second-order operator, solve the subproblem, run the first ratio test;
//! on failure refine the step with the safeguard `Gamma(x, s_bar)` and run
//! the second ratio test; truncate moved iterates; update the radius and
//! the adaptive metric scalar.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::directions::{pseudo_gradient, DirectionOutput, PseudoGradientKind};
use crate::error::{NtrError, Result};
use crate::problem::{CompositeProblem, Vector};
use crate::regularizers::Regularizer;
use crate::subproblem::{
    cauchy_point, cg_steihaug, reduced_newton_step, regularized_step, LinearOperator,
    QuadraticModel, SubproblemSolution,
};

/// Geometrically decreasing truncation levels `eps_s = initial * ratio^s`:
/// positive, strictly decreasing, summable.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpsSequence {
    pub initial: f64,
    pub ratio: f64,
}

impl Default for EpsSequence {
    fn default() -> Self {
        Self { initial: 0.1, ratio: 0.5 }
    }
}

impl EpsSequence {
    pub fn at(&self, s: u64) -> f64 {
        self.initial * self.ratio.powi(s.min(1 << 30) as i32)
    }

    pub fn total(&self) -> f64 {
        self.initial / (1.0 - self.ratio)
    }

    fn validate(&self) -> Result<()> {
        if self.initial > 0.0 && self.ratio > 0.0 && self.ratio < 1.0 {
            Ok(())
        } else {
            Err(NtrError::InvalidArgument(
                "eps sequence needs initial > 0 and ratio in (0,1)".into(),
            ))
        }
    }
}

/// Which model-reduction floor drives the subproblem solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllChoice {
    /// `ell == 0`: the step must match the Cauchy decrease directly.
    Classic,
    /// Piecewise scheme: Cauchy point whenever `Delta < zeta`.
    PiecewiseCauchySwitch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubproblemMethod {
    CgSteihaug,
    Regularized,
    /// Block elimination on the semismooth-Newton system (l1 problems).
    ReducedNewton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondOrderKind {
    /// `B = lambda J(x)` with `J` a generalized Jacobian of the natural
    /// residual (l1 problems).
    SemismoothJacobian,
    /// `B` equal to the Hessian of the smooth part.
    Hessian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientKind {
    NormalMap,
    NaturalResidual,
    ScaledNaturalResidual,
}

/// All solver parameters. `validate` enforces the ordering constraints
/// `0 < eta < eta1 < eta2 < 1` and `0 < r1 < 1 < r2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrConfig {
    pub eta: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub r1: f64,
    pub r2: f64,
    pub delta0: f64,
    pub delta_max: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub eps_sequence: EpsSequence,
    pub ell_choice: EllChoice,
    pub zeta: f64,
    pub gradient: GradientKind,
    pub second_order: SecondOrderKind,
    pub subproblem: SubproblemMethod,
    pub eps_stop: f64,
    pub max_iterations: usize,
    pub lambda0: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Check the sufficient-descent condition for the shortened step and
    /// fall back to the Cauchy direction when it fails. The experiments
    /// historically skip this check.
    pub check_shortened_descent: bool,
    /// Regularized-solver curvature constants.
    pub reg_lambda1: f64,
    pub reg_lambda2: f64,
    pub cg_max_iter: usize,
    /// Log the per-iteration quality report (costs extra operator calls
    /// for the norm estimate of `B`).
    pub monitor_quality: bool,
}

impl Default for TrConfig {
    fn default() -> Self {
        Self {
            eta: 0.05,
            eta1: 0.25,
            eta2: 0.75,
            r1: 0.25,
            r2: 2.0,
            delta0: 1.0,
            delta_max: 1e3,
            gamma1: 1.0,
            gamma2: 1.0,
            eps_sequence: EpsSequence::default(),
            ell_choice: EllChoice::PiecewiseCauchySwitch,
            zeta: 1e-4,
            gradient: GradientKind::ScaledNaturalResidual,
            second_order: SecondOrderKind::SemismoothJacobian,
            subproblem: SubproblemMethod::ReducedNewton,
            eps_stop: 1e-6,
            max_iterations: 500,
            lambda0: 1.0,
            lambda_min: 1e-3,
            lambda_max: 1e3,
            check_shortened_descent: true,
            reg_lambda1: 1e-4,
            reg_lambda2: 1e4,
            cg_max_iter: 200,
            monitor_quality: false,
        }
    }
}

impl TrConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.eta
            && self.eta < self.eta1
            && self.eta1 < self.eta2
            && self.eta2 < 1.0
            && 0.0 < self.r1
            && self.r1 < 1.0
            && self.r2 > 1.0
            && self.delta0 > 0.0
            && self.delta0 <= self.delta_max
            && self.gamma1 > 0.0
            && self.gamma2 > 0.0
            && self.zeta > 0.0
            && self.eps_stop >= 0.0
            && self.lambda0 >= self.lambda_min
            && self.lambda0 <= self.lambda_max
            && self.lambda_min > 0.0;
        if !ok {
            return Err(NtrError::InvalidArgument(
                "trust-region parameter ordering constraints violated".into(),
            ));
        }
        self.eps_sequence.validate()
    }

    fn pseudo_gradient_kind(&self, lambda: f64) -> PseudoGradientKind {
        match self.gradient {
            GradientKind::NormalMap => PseudoGradientKind::NormalMap,
            GradientKind::NaturalResidual => PseudoGradientKind::NaturalResidual(lambda),
            GradientKind::ScaledNaturalResidual => {
                PseudoGradientKind::ScaledNaturalResidual(lambda)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Full,
    Safeguarded,
    CauchyFallback,
    Rejected,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationEvent {
    pub stratum: usize,
    pub eps_used: f64,
    pub displacement: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
    pub step_kind: StepKind,
    pub alpha: f64,
    pub delta_before: f64,
    pub delta_after: f64,
    pub g_norm: f64,
    pub residual: f64,
    pub psi_before: f64,
    pub psi_after: f64,
    pub lambda: f64,
    pub truncations: Vec<TruncationEvent>,
    pub operator_calls: u64,
    /// Hash of the active-stratum descriptor (support pattern) of the
    /// iterate after truncation.
    pub support_hash: u64,
    pub support_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    ZeroGradient,
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub final_x: Vec<f64>,
    pub final_objective: f64,
    pub final_residual: f64,
    pub iterations: usize,
    pub operator_calls: u64,
    pub wall_time_s: f64,
    pub records: Vec<IterationRecord>,
    /// Runtime checks of the theoretical invariants; empty on a clean run.
    pub invariant_violations: Vec<String>,
    /// Cumulative truncation displacement `sum_k ||x^{k+1} - x~^k||`.
    pub truncation_displacement: f64,
}

/// First ratio test: actual over predicted reduction. A nonpositive
/// prediction counts as a failed test; a prediction below evaluation
/// precision accepts unless the objective measurably increased.
pub fn reduction_ratio(psi_x: f64, psi_trial: f64, predicted: f64) -> f64 {
    let noise = 1e-14 * (1.0 + psi_x.abs());
    if predicted <= 0.0 {
        f64::NEG_INFINITY
    } else if predicted <= noise {
        // the predicted change is below objective evaluation precision,
        // so the ratio test carries no information; accept the step as
        // long as it does not measurably increase the objective
        if psi_trial <= psi_x + noise {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        (psi_x - psi_trial) / predicted
    }
}

pub fn update_radius_after_rho1(delta: f64, rho1: f64, config: &TrConfig) -> f64 {
    if rho1 > config.eta2 {
        config.delta_max.min(config.r2 * delta)
    } else {
        delta
    }
}

pub fn update_radius_after_rho2(delta: f64, rho2: f64, config: &TrConfig) -> f64 {
    if rho2 < config.eta1 {
        config.r1 * delta
    } else if rho2 > config.eta2 {
        config.delta_max.min(config.r2 * delta)
    } else {
        delta
    }
}

/// Outcome of the safeguarded-stepsize refinement.
pub struct SafeguardedStep {
    pub alpha: f64,
    pub direction: Vector,
    pub used_cauchy: bool,
}

/// Shortens the step to `alpha = min(Gamma(x, s_bar), ||s||)` along the
/// normalized direction; switches to the Cauchy direction when the
/// shortened step loses too much model decrease.
pub fn safeguarded_step(
    reg: &Regularizer,
    x: &Vector,
    model: &QuadraticModel,
    sol: &SubproblemSolution,
    delta: f64,
    check_descent: bool,
) -> Result<SafeguardedStep> {
    let s = &sol.s;
    let s_norm = s.dot(s).sqrt();
    if s_norm == 0.0 {
        return Err(NtrError::InvalidArgument("safeguarded step needs s != 0".into()));
    }
    let s_bar = s.mapv(|v| v / s_norm);
    let alpha = reg.gamma_dir(x, &s_bar)?.min(s_norm);
    if !check_descent {
        return Ok(SafeguardedStep { alpha, direction: s_bar, used_cauchy: false });
    }
    let shortened = s_bar.mapv(|v| alpha * v);
    let ok = model.reduction(&shortened)
        >= alpha / (2.0 * s_norm) * sol.predicted_reduction - 1e-14;
    if ok {
        return Ok(SafeguardedStep { alpha, direction: s_bar, used_cauchy: false });
    }
    let cauchy = cauchy_point(model, delta)?;
    let c_norm = cauchy.s.dot(&cauchy.s).sqrt();
    let c_bar = cauchy.s.mapv(|v| v / c_norm);
    let alpha_c = reg.gamma_dir(x, &c_bar)?.min(c_norm);
    Ok(SafeguardedStep { alpha: alpha_c, direction: c_bar, used_cauchy: true })
}

/// The truncation step: repeatedly applies `T` with the per-stratum
/// level `eps_{c_i}` until the safeguard is large enough. Terminates in at
/// most `m` passes.
pub fn truncation_step(
    reg: &Regularizer,
    x_tilde: &Vector,
    counters: &mut [u64],
    eps: &EpsSequence,
) -> Result<(Vector, Vec<TruncationEvent>)> {
    let m = reg.stratum_count();
    let mut x = x_tilde.clone();
    let mut events = Vec::new();
    for _pass in 0..=m {
        let i = reg.stratum_index(&x);
        let level = eps.at(counters[i]);
        if reg.gamma(&x) >= level {
            return Ok((x, events));
        }
        let truncated = reg.truncate(&x, level)?;
        let diff = (&truncated - &x).dot(&(&truncated - &x)).sqrt();
        events.push(TruncationEvent { stratum: i, eps_used: level, displacement: diff });
        counters[i] += 1;
        if reg.stratum_index(&truncated) <= i {
            return Err(NtrError::InternalInvariant(format!(
                "truncation did not deepen the stratum (index {i})"
            )));
        }
        x = truncated;
    }
    Err(NtrError::InternalInvariant(format!(
        "truncation step exceeded {m} passes"
    )))
}

/// Adaptive metric scalar: a secant estimate of the local Lipschitz
/// constant of the gradient, clamped to the configured bounds.
pub fn adaptive_lambda(
    x_new: &Vector,
    x_old: &Vector,
    grad_new: &Vector,
    grad_old: &Vector,
    current: f64,
    min: f64,
    max: f64,
) -> f64 {
    let dx = x_new - x_old;
    let dg = grad_new - grad_old;
    let dg_norm = dg.dot(&dg).sqrt();
    if dg_norm == 0.0 {
        return current;
    }
    let secant = (dx.dot(&dx).sqrt() / dg_norm).clamp(min, max);
    // geometric damping: the raw secant estimate is direction-dependent
    // and oscillates between Newton and truncation steps
    (current.sqrt() * secant.sqrt()).clamp(min, max)
}

/// `B = lambda J(x)` with
/// `J = I - M(x) (I - lambda^{-1} hess f(x))`, `M` the 0/1 diagonal over
/// the active set of the l1 prox. Asymmetric in general; the transpose has
/// closed form since the Hessian is symmetric.
pub struct SemismoothJacobian<'a> {
    problem: &'a CompositeProblem,
    x: &'a Vector,
    lambda: f64,
    active_mask: Vec<bool>,
}

impl<'a> SemismoothJacobian<'a> {
    pub fn new(
        problem: &'a CompositeProblem,
        x: &'a Vector,
        grad: &Vector,
        lambda: f64,
        mu: f64,
    ) -> Self {
        let active_mask = (0..x.len())
            .map(|i| (x[i] - grad[i] / lambda).abs() > mu / lambda)
            .collect();
        Self { problem, x, lambda, active_mask }
    }

    pub fn active_set(&self) -> Vec<usize> {
        self.active_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
            .collect()
    }
}

impl LinearOperator for SemismoothJacobian<'_> {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn apply(&self, v: &Vector) -> Vector {
        // lambda (v - M (v - lambda^{-1} H v))
        let hv = self.problem.smooth.hvp(self.x, v);
        Array1::from_shape_fn(v.len(), |i| {
            if self.active_mask[i] {
                hv[i]
            } else {
                self.lambda * v[i]
            }
        })
    }

    fn apply_transpose(&self, v: &Vector) -> Vector {
        // lambda (v - (I - lambda^{-1} H) M v)
        let mv = Array1::from_shape_fn(v.len(), |i| {
            if self.active_mask[i] {
                v[i]
            } else {
                0.0
            }
        });
        let hmv = self.problem.smooth.hvp(self.x, &mv);
        Array1::from_shape_fn(v.len(), |i| {
            self.lambda * (v[i] - mv[i]) + hmv[i]
        })
    }
}

/// Hessian of the smooth part as the model operator.
pub struct HessianOperator<'a> {
    pub problem: &'a CompositeProblem,
    pub x: &'a Vector,
}

impl LinearOperator for HessianOperator<'_> {
    fn dim(&self) -> usize {
        self.x.len()
    }
    fn apply(&self, v: &Vector) -> Vector {
        self.problem.smooth.hvp(self.x, v)
    }
}

fn support_descriptor(reg: &Regularizer, x: &Vector) -> (u64, usize) {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    let mut hasher = DefaultHasher::new();
    support.hash(&mut hasher);
    reg.stratum_index(x).hash(&mut hasher);
    (hasher.finish(), support.len())
}

fn solve_subproblem(
    problem: &CompositeProblem,
    config: &TrConfig,
    model: &QuadraticModel,
    grad: &Vector,
    x: &Vector,
    lambda: f64,
    delta: f64,
    residual: f64,
) -> Result<SubproblemSolution> {
    if config.ell_choice == EllChoice::PiecewiseCauchySwitch && delta < config.zeta {
        return cauchy_point(model, delta);
    }
    let gnorm = model.g.dot(&model.g).sqrt();
    let cg_tol = 5e-2 * gnorm.sqrt().min(1.0);
    match config.subproblem {
        SubproblemMethod::CgSteihaug => cg_steihaug(model, delta, cg_tol, config.cg_max_iter),
        SubproblemMethod::Regularized => {
            regularized_step(model, delta, config.reg_lambda1, config.reg_lambda2, cg_tol)
        }
        SubproblemMethod::ReducedNewton => {
            let mu = problem.regularizer.l1_weight().ok_or_else(|| {
                NtrError::InvalidArgument(
                    "reduced Newton subproblem requires an l1 regularizer".into(),
                )
            })?;
            let active: Vec<usize> = (0..x.len())
                .filter(|&i| (x[i] - grad[i] / lambda).abs() > mu / lambda)
                .collect();
            let hess = |v: &Vector| problem.smooth.hvp(x, v);
            // the Newton system (J + tI) p = -F_nat takes the unscaled
            // natural residual on the right-hand side
            let rhs = model.g.mapv(|v| v / lambda);
            // The reduced block can be rank-deficient (more active indices
            // than measurements), so the shift starts proportional to the
            // stationarity residual and vanishes near a solution. The
            // residual passed in is relative to its initial value, which
            // keeps the shift scale-free.
            let mut t = 0.1 * residual.min(1.0);
            for _ in 0..=5 {
                let step = reduced_newton_step(
                    &hess,
                    x.len(),
                    lambda,
                    t,
                    &rhs,
                    &active,
                    cg_tol,
                    config.cg_max_iter,
                );
                let mut p = step.p;
                // The model's linear term is one-sided at kinks: on
                // coordinates with x_i = 0 it is only valid on the descent
                // side -sgn(g_i), and on coordinates with x_i != 0 only up
                // to the sign change, beyond which the decrease is
                // overstated by 2 mu per unit. Zero out components pointing
                // the wrong way off a kink, and stop crossing components at
                // their kink so the model stays valid along the whole step.
                for i in 0..p.len() {
                    if x[i] == 0.0 {
                        if p[i] * model.g[i] > 0.0 {
                            p[i] = 0.0;
                        }
                    } else if (x[i] + p[i]) * x[i] < 0.0 {
                        p[i] = -x[i];
                    }
                }
                let pnorm = p.dot(&p).sqrt();
                if pnorm > 0.0 {
                    let scale = delta.min(pnorm) / pnorm;
                    let s = p.mapv(|v| scale * v);
                    let predicted = model.reduction(&s);
                    if predicted > 0.0 {
                        return Ok(SubproblemSolution {
                            s,
                            predicted_reduction: predicted,
                            hit_boundary: pnorm >= delta,
                            inner_iterations: step.cg_iterations,
                            t_k: t,
                            flagged: step.flagged,
                        });
                    }
                }
                t = if t < 1e-8 { 1e-8 } else { 10.0 * t };
            }
            cauchy_point(model, delta)
        }
    }
}

/// Runs the trust-region loop from `x0`.
pub fn solve(problem: &CompositeProblem, config: &TrConfig, x0: &Vector) -> Result<SolveReport> {
    config.validate()?;
    let start = std::time::Instant::now();
    let n = problem.dim();
    let reg = &problem.regularizer;
    let m = reg.stratum_count();
    let kappa = reg.kappa();

    let mut x = x0.clone();
    let mut delta = config.delta0;
    let mut lambda = config.lambda0;
    let mut counters = vec![0u64; m + 1];
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut violations: Vec<String> = Vec::new();
    let mut cum_displacement = 0.0f64;
    let displacement_budget = m as f64 * kappa * config.eps_sequence.total();

    let mut grad = problem.grad_f(&x)?;
    let mut psi_x = problem.eval_psi(&x)?;
    let mut status = SolveStatus::MaxIterations;
    let mut final_residual = f64::NAN;
    let mut residual0 = 0.0f64;
    let mut iterations = 0;

    for k in 0..config.max_iterations {
        iterations = k;
        // pseudo-gradient and stopping residual share the same prox
        let f_nat = {
            let z = &x - &grad.mapv(|v| v / lambda);
            let p = reg.prox(&z, &crate::regularizers::Metric::scalar(lambda))?;
            &x - &p
        };
        let residual = lambda * f_nat.dot(&f_nat).sqrt();
        final_residual = residual;
        if !(residual0 > 0.0) {
            residual0 = residual.max(f64::MIN_POSITIVE);
        }
        if residual <= config.eps_stop {
            status = SolveStatus::Converged;
            break;
        }
        let dir: DirectionOutput = match config.gradient {
            GradientKind::ScaledNaturalResidual => {
                let g = f_nat.mapv(|v| lambda * v);
                let norm = g.dot(&g).sqrt();
                let d = if norm == 0.0 { Array1::zeros(n) } else { g.mapv(|v| -v / norm) };
                DirectionOutput { g, u: -norm, d }
            }
            _ => pseudo_gradient(problem, &x, config.pseudo_gradient_kind(lambda))?,
        };
        if dir.is_zero() {
            status = SolveStatus::ZeroGradient;
            break;
        }
        let g_norm = -dir.u;

        let jacobian;
        let hessian;
        let b: &dyn LinearOperator = match config.second_order {
            SecondOrderKind::SemismoothJacobian => {
                let mu = reg.l1_weight().ok_or_else(|| {
                    NtrError::InvalidArgument(
                        "semismooth Jacobian model requires an l1 regularizer".into(),
                    )
                })?;
                jacobian = SemismoothJacobian::new(problem, &x, &grad, lambda, mu);
                &jacobian
            }
            SecondOrderKind::Hessian => {
                hessian = HessianOperator { problem, x: &x };
                &hessian
            }
        };
        let symmetric = matches!(config.second_order, SecondOrderKind::Hessian);
        let model = QuadraticModel::new(psi_x, dir.g.clone(), b, symmetric);

        let sol = solve_subproblem(
            problem,
            config,
            &model,
            &grad,
            &x,
            lambda,
            delta,
            residual / residual0,
        )?;
        let trial = &x + &sol.s;
        let psi_trial = problem.eval_psi(&trial)?;
        let rho1 = reduction_ratio(psi_x, psi_trial, sol.predicted_reduction);

        let delta_before = delta;
        let mut rho2 = None;
        let mut alpha = sol.s.dot(&sol.s).sqrt();
        let step_kind;
        let (x_tilde, psi_tilde, executed_pred) = if rho1 >= config.eta1 {
            delta = update_radius_after_rho1(delta, rho1, config);
            step_kind = StepKind::Full;
            (trial, psi_trial, sol.predicted_reduction)
        } else {
            let sg = safeguarded_step(reg, &x, &model, &sol, delta, config.check_shortened_descent)?;
            alpha = sg.alpha;
            let step = sg.direction.mapv(|v| sg.alpha * v);
            let pred2 = model.reduction(&step);
            let trial2 = &x + &step;
            let psi2 = problem.eval_psi(&trial2)?;
            let r2 = reduction_ratio(psi_x, psi2, pred2);
            rho2 = Some(r2);
            delta = update_radius_after_rho2(delta, r2, config);
            if r2 >= config.eta {
                step_kind = if sg.used_cauchy {
                    StepKind::CauchyFallback
                } else {
                    StepKind::Safeguarded
                };
                (trial2, psi2, pred2)
            } else {
                step_kind = StepKind::Rejected;
                (x.clone(), psi_x, 0.0)
            }
        };
        if !(delta > 0.0 && delta <= config.delta_max) {
            violations.push(format!("iteration {k}: radius {delta} out of (0, delta_max]"));
        }

        let moved = step_kind != StepKind::Rejected;
        if moved {
            if psi_tilde > psi_x + 1e-12 * (1.0 + psi_x.abs()) {
                violations.push(format!(
                    "iteration {k}: accepted step increased psi before truncation"
                ));
            }
            let eta_floor = config.eta * executed_pred - 1e-12 * (1.0 + psi_x.abs());
            if psi_x - psi_tilde < eta_floor {
                violations.push(format!(
                    "iteration {k}: accepted decrease below eta * predicted reduction"
                ));
            }
        }

        let (mut x_next, mut events, mut step_disp) = if moved {
            let (xt, ev) = truncation_step(reg, &x_tilde, &mut counters, &config.eps_sequence)?;
            let d = (&xt - &x_tilde).mapv(|v| v * v).sum().sqrt();
            (xt, ev, d)
        } else {
            (x_tilde.clone(), Vec::new(), 0.0)
        };
        let mut psi_next = if moved { psi_tilde } else { psi_x };
        if !events.is_empty() {
            // keep the truncation only if it does not undo the descent just
            // achieved; the counters stay advanced either way, so repeated
            // attempts on the same stratum still hit shrinking thresholds
            let psi_trunc = problem.eval_psi(&x_next)?;
            if psi_trunc > psi_tilde {
                x_next = x_tilde.clone();
                events.clear();
                step_disp = 0.0;
            } else {
                psi_next = psi_trunc;
            }
        }
        cum_displacement += step_disp;
        if cum_displacement > displacement_budget + 1e-9 {
            violations.push(format!(
                "iteration {k}: cumulative truncation displacement exceeds m*kappa*sum(eps)"
            ));
        }
        let (support_hash, support_size) = support_descriptor(reg, &x_next);
        records.push(IterationRecord {
            iteration: k,
            rho1: if rho1.is_finite() { Some(rho1) } else { None },
            rho2: rho2.filter(|r| r.is_finite()),
            step_kind,
            alpha,
            delta_before,
            delta_after: delta,
            g_norm,
            residual,
            psi_before: psi_x,
            psi_after: psi_next,
            lambda,
            truncations: events,
            operator_calls: problem.smooth.operator_calls(),
            support_hash,
            support_size,
        });

        if moved {
            let grad_next = problem.grad_f(&x_next)?;
            lambda = adaptive_lambda(
                &x_next,
                &x,
                &grad_next,
                &grad,
                lambda,
                config.lambda_min,
                config.lambda_max,
            );
            grad = grad_next;
            x = x_next;
            psi_x = psi_next;
        }
        iterations = k + 1;
    }

    if status == SolveStatus::Converged && final_residual > config.eps_stop {
        violations.push("converged status with residual above tolerance".into());
    }

    let final_objective = problem.eval_psi(&x)?;
    Ok(SolveReport {
        status,
        final_x: x.to_vec(),
        final_objective,
        final_residual,
        iterations,
        operator_calls: problem.smooth.operator_calls(),
        wall_time_s: start.elapsed().as_secs_f64(),
        records,
        invariant_violations: violations,
        truncation_displacement: cum_displacement,
    })
}
