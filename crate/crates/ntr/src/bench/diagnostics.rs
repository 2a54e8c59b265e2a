//! Post-hoc convergence diagnostics from an iteration log.

use serde::Serialize;

use crate::solver::IterationRecord;

#[derive(Debug, Clone, Serialize)]
pub struct RateDiagnostic {
    /// First iteration after which the active-stratum descriptor never
    /// changes; `None` if it keeps changing up to the last record.
    pub support_stable_from: Option<usize>,
    /// Least-squares slope of `log r_{k+1}` against `log r_k` over the
    /// residual tail; about 1 for linear, about 2 for quadratic decay.
    /// `None` with fewer than 3 tail pairs.
    pub rate_slope: Option<f64>,
}

pub fn local_rate_diagnostic(records: &[IterationRecord]) -> RateDiagnostic {
    RateDiagnostic {
        support_stable_from: support_stable_from(records),
        rate_slope: tail_slope(&records.iter().map(|r| r.residual).collect::<Vec<_>>()),
    }
}

fn support_stable_from(records: &[IterationRecord]) -> Option<usize> {
    let last = records.last()?;
    let mut from = records.len() - 1;
    for (i, r) in records.iter().enumerate().rev() {
        if r.support_hash == last.support_hash {
            from = i;
        } else {
            break;
        }
    }
    Some(records[from].iteration)
}

/// Fits `log r_{k+1} = a + slope * log r_k` by least squares over the
/// trailing strictly decreasing, positive part of the sequence.
pub fn tail_slope(residuals: &[f64]) -> Option<f64> {
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for w in residuals.windows(2) {
        if w[0] > 0.0 && w[1] > 0.0 && w[1] < w[0] {
            pairs.push((w[0].ln(), w[1].ln()));
        } else if w[1] != w[0] {
            // repeated residuals (rejected steps) are skipped; an actual
            // increase restarts the tail
            pairs.clear();
        }
    }
    if pairs.len() < 3 {
        return None;
    }
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}
