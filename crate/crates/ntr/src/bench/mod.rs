//! Experiment machinery: problem generators, data loading, the FISTA
//! baseline, the benchmark table driver, and convergence diagnostics.

pub mod dct;
pub mod diagnostics;
pub mod fista;
pub mod harness;
pub mod lasso;
pub mod libsvm;
pub mod tanh;
