//! Trust-region optimization for nonsmooth composite problems
//! `psi(x) = f(x) + phi(x)` with smooth (possibly nonconvex) `f` and
//! real-valued convex `phi`, plus a benchmark harness for l1 experiments.

pub mod bench;
pub mod directions;
pub mod error;
pub mod problem;
pub mod regularizers;
pub mod solver;
pub mod subproblem;

pub use error::{NtrError, Result};
pub use problem::{CompositeProblem, SmoothOracle, Vector};
pub use regularizers::{Metric, Regularizer};
