//! Benchmark driver: runs the trust-region solver and FISTA over a grid of
//! (dynamic range, tolerance, trial) cells and writes the aggregate table.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::solver::{solve, SolveStatus, TrConfig};

use super::fista::fista;
use super::lasso::gen_lasso;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub n: usize,
    pub m: usize,
    pub ranges: Vec<f64>,
    pub tolerances: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub sigma: f64,
    /// Fixed l1 weight; when absent each instance uses its generated
    /// default.
    pub mu: Option<f64>,
    pub methods: Vec<String>,
    pub max_iterations: usize,
    pub fista_max_iterations: usize,
    pub solver: TrConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: 4096,
            m: 512,
            ranges: vec![20.0, 40.0, 60.0, 80.0],
            tolerances: vec![1e0, 1e-1, 1e-2, 1e-4, 1e-6],
            trials: 10,
            seed: 2024,
            sigma: 0.1,
            mu: None,
            methods: vec!["ntr".into(), "fista".into()],
            max_iterations: 500,
            fista_max_iterations: 200_000,
            solver: TrConfig::default(),
        }
    }
}

/// One aggregated table row: means over trials for a (method, range,
/// tolerance) cell. `failed` counts aborted or non-converged trials.
#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub method: String,
    pub range: f64,
    pub tolerance: f64,
    pub time: f64,
    pub na: f64,
    pub objective: f64,
    pub residual: f64,
    pub iters: f64,
    pub failed: usize,
}

#[derive(Debug, Serialize)]
pub struct RunTable {
    pub rows: Vec<RunRow>,
}

struct TrialOutcome {
    time: f64,
    na: u64,
    objective: f64,
    residual: f64,
    iters: usize,
    ok: bool,
}

fn run_trial(
    config: &BenchConfig,
    method: &str,
    range: f64,
    tolerance: f64,
    trial: usize,
) -> Result<TrialOutcome> {
    let seed = config.seed.wrapping_add(trial as u64);
    let instance = gen_lasso(config.n, config.m, range, config.sigma, config.mu, seed)?;
    let problem = instance.problem()?;
    match method {
        "ntr" => {
            let mut solver_cfg = config.solver.clone();
            solver_cfg.eps_stop = tolerance;
            solver_cfg.max_iterations = config.max_iterations;
            // radius bounds follow the data scale (mu tracks ||A^T b||_inf):
            // high dynamic ranges put the solution many orders of magnitude
            // away from the origin and a fixed cap would clip every step
            let scale = 10.0 * instance.mu;
            solver_cfg.delta0 = solver_cfg.delta0.max(scale);
            solver_cfg.delta_max = solver_cfg.delta_max.max(1e3 * scale);
            let report = solve(&problem, &solver_cfg, &ndarray::Array1::zeros(config.n))?;
            Ok(TrialOutcome {
                time: report.wall_time_s,
                na: report.operator_calls,
                objective: report.final_objective,
                residual: report.final_residual,
                iters: report.iterations,
                ok: report.status == SolveStatus::Converged
                    && report.invariant_violations.is_empty(),
            })
        }
        "fista" => {
            let report = fista(&problem, 1.0, tolerance, config.fista_max_iterations, false)?;
            Ok(TrialOutcome {
                time: report.wall_time_s,
                na: report.operator_calls,
                objective: report.final_objective,
                residual: report.final_residual,
                iters: report.iterations,
                ok: report.status == SolveStatus::Converged,
            })
        }
        other => Err(crate::error::NtrError::InvalidArgument(format!(
            "unknown method {other:?} (expected ntr or fista)"
        ))),
    }
}

pub fn run_benchmark(config: &BenchConfig) -> Result<RunTable> {
    let mut rows = Vec::new();
    for &range in &config.ranges {
        for &tolerance in &config.tolerances {
            for method in &config.methods {
                let mut times = 0.0;
                let mut nas = 0.0;
                let mut objs = 0.0;
                let mut residuals = 0.0;
                let mut iters = 0.0;
                let mut failed = 0usize;
                for trial in 0..config.trials {
                    match run_trial(config, method, range, tolerance, trial) {
                        Ok(o) => {
                            times += o.time;
                            nas += o.na as f64;
                            objs += o.objective;
                            residuals += o.residual;
                            iters += o.iters as f64;
                            if !o.ok {
                                failed += 1;
                            }
                        }
                        Err(_) => failed += 1,
                    }
                }
                let t = config.trials as f64;
                rows.push(RunRow {
                    method: method.clone(),
                    range,
                    tolerance,
                    time: times / t,
                    na: nas / t,
                    objective: objs / t,
                    residual: residuals / t,
                    iters: iters / t,
                    failed,
                });
            }
        }
    }
    Ok(RunTable { rows })
}

impl RunTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path)?;
        writeln!(out, "method,range,tolerance,time,NA,objective,residual,iters,failed")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:e},{:.6},{},{:.10e},{:.6e},{},{}",
                r.method, r.range, r.tolerance, r.time, r.na, r.objective, r.residual, r.iters,
                r.failed
            )?;
        }
        Ok(())
    }

    /// CSV text without the time column, for determinism comparisons.
    pub fn deterministic_view(&self) -> String {
        let mut s = String::from("method,range,tolerance,NA,objective,residual,iters,failed\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:e},{},{:.10e},{:.6e},{},{}\n",
                r.method, r.range, r.tolerance, r.na, r.objective, r.residual, r.iters, r.failed
            ));
        }
        s
    }
}
