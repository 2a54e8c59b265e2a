//! Command-line front end: instance generation, single solves, and the
//! benchmark table.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ndarray::Array1;

use ntr::bench::harness::{run_benchmark, BenchConfig};
use ntr::bench::lasso::{gen_lasso, LassoInstance};
use ntr::solver::{solve, SolveReport, TrConfig};

#[derive(Parser)]
#[command(name = "ntr", about = "Nonsmooth trust-region solver for composite problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random compressed-sensing instance and write it as JSON.
    Gen {
        #[arg(long, default_value_t = 4096)]
        n: usize,
        #[arg(long, default_value_t = 512)]
        m: usize,
        /// Dynamic range of the planted coefficients, in dB.
        #[arg(long, default_value_t = 20.0)]
        range: f64,
        /// Noise standard deviation.
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        /// l1 weight; defaults to 0.1 * ||A^T b||_inf.
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Output path for the instance snapshot.
        #[arg(long, short, default_value = "instance.json")]
        output: PathBuf,
    },
    /// Solve one instance and write the report (JSON) and iteration log (CSV).
    Solve {
        /// Instance snapshot produced by `gen`; generated on the fly when
        /// absent.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = 4096)]
        n: usize,
        #[arg(long, default_value_t = 512)]
        m: usize,
        #[arg(long, default_value_t = 20.0)]
        range: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Solver parameters as TOML; defaults apply when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
        /// Per-iteration CSV log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run the full benchmark grid and write the aggregate table as CSV.
    Bench {
        /// Benchmark configuration as TOML; defaults apply when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, short, default_value = "bench.csv")]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Gen { n, m, range, sigma, mu, seed, output } => {
            let instance = gen_lasso(n, m, range, sigma, mu, seed)?;
            fs::write(&output, serde_json::to_string_pretty(&instance)?)?;
            println!(
                "wrote {} (n={}, m={}, mu={:.6e})",
                output.display(),
                instance.n,
                instance.m,
                instance.mu
            );
        }
        Command::Solve {
            instance,
            n,
            m,
            range,
            sigma,
            mu,
            seed,
            config,
            tolerance,
            report,
            log,
        } => {
            let instance: LassoInstance = match instance {
                Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
                None => gen_lasso(n, m, range, sigma, mu, seed)?,
            };
            let mut cfg: TrConfig = match config {
                Some(path) => toml::from_str(&fs::read_to_string(path)?)?,
                None => TrConfig::default(),
            };
            cfg.eps_stop = tolerance;
            let problem = instance.problem()?;
            let solved = solve(&problem, &cfg, &Array1::zeros(instance.n))?;
            println!(
                "{:?}: {} iterations, {} operator calls, objective {:.9e}, residual {:.3e}",
                solved.status,
                solved.iterations,
                solved.operator_calls,
                solved.final_objective,
                solved.final_residual
            );
            if !solved.invariant_violations.is_empty() {
                eprintln!("invariant violations: {:?}", solved.invariant_violations);
            }
            if let Some(path) = log {
                write_iteration_log(&solved, &path)?;
            }
            fs::write(&report, serde_json::to_string_pretty(&solved)?)?;
        }
        Command::Bench { config, output } => {
            let cfg: BenchConfig = match config {
                Some(path) => toml::from_str(&fs::read_to_string(path)?)?,
                None => BenchConfig::default(),
            };
            let table = run_benchmark(&cfg)?;
            table.write_csv(&output)?;
            println!("wrote {} ({} rows)", output.display(), table.rows.len());
        }
    }
    Ok(())
}

fn write_iteration_log(report: &SolveReport, path: &PathBuf) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(
        f,
        "iteration,step_kind,rho1,rho2,alpha,delta,residual,psi,lambda,operator_calls,support_size"
    )?;
    for r in &report.records {
        writeln!(
            f,
            "{},{:?},{},{},{},{},{},{},{},{},{}",
            r.iteration,
            r.step_kind,
            r.rho1.map_or(String::new(), |v| v.to_string()),
            r.rho2.map_or(String::new(), |v| v.to_string()),
            r.alpha,
            r.delta_after,
            r.residual,
            r.psi_after,
            r.lambda,
            r.operator_calls,
            r.support_size
        )?;
    }
    Ok(())
}
