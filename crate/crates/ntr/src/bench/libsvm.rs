//! LIBSVM sparse text format loader (label then `index:value` pairs,
//! 1-based indices), densified for the tanh classifier.

use std::path::Path;

use ndarray::Array2;

use crate::error::{NtrError, Result};

use super::tanh::ClassificationInstance;

/// Parses a LIBSVM file into a dense instance. Labels 0/1 are remapped to
/// -1/+1; any other label must already be one of those two values. With
/// `scale` set, every feature column is divided by its max absolute value.
pub fn load_libsvm(path: &Path, mu: f64, scale: bool) -> Result<ClassificationInstance> {
    let text = std::fs::read_to_string(path)?;
    parse_libsvm(&text, mu, scale)
}

pub fn parse_libsvm(text: &str, mu: f64, scale: bool) -> Result<ClassificationInstance> {
    let mut labels: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut n = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let label_tok = parts.next().unwrap();
        let raw: f64 = label_tok.parse().map_err(|_| NtrError::Parse {
            line: lineno,
            message: format!("bad label {label_tok:?}"),
        })?;
        let label = match raw {
            v if v == 1.0 => 1.0,
            v if v == -1.0 => -1.0,
            v if v == 0.0 => -1.0,
            _ => {
                return Err(NtrError::Parse {
                    line: lineno,
                    message: format!("label {raw} not in {{-1, 0, +1}}"),
                })
            }
        };
        let mut row = Vec::new();
        for tok in parts {
            let (i, v) = tok.split_once(':').ok_or_else(|| NtrError::Parse {
                line: lineno,
                message: format!("expected index:value, got {tok:?}"),
            })?;
            let i: usize = i.parse().map_err(|_| NtrError::Parse {
                line: lineno,
                message: format!("bad feature index {i:?}"),
            })?;
            if i == 0 {
                return Err(NtrError::Parse {
                    line: lineno,
                    message: "feature indices are 1-based".into(),
                });
            }
            let v: f64 = v.parse().map_err(|_| NtrError::Parse {
                line: lineno,
                message: format!("bad feature value {v:?}"),
            })?;
            n = n.max(i);
            row.push((i - 1, v));
        }
        labels.push(label);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(NtrError::InvalidArgument("empty LIBSVM input".into()));
    }
    let mut a = Array2::zeros((rows.len(), n));
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            a[[r, c]] = v;
        }
    }
    if scale {
        for c in 0..n {
            let max = (0..rows.len()).fold(0.0f64, |m, r| m.max(a[[r, c]].abs()));
            if max > 0.0 {
                for r in 0..rows.len() {
                    a[[r, c]] /= max;
                }
            }
        }
    }
    Ok(ClassificationInstance { a, b: labels, mu })
}
