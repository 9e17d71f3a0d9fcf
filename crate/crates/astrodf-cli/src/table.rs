//! Quantile helpers and trace-CSV reading shared by the subcommands.

use crate::CliError;
use std::path::{Path, PathBuf};

/// Linear-interpolation quantile on a sorted copy of the data.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// A parsed trace file: dimension plus the columns summarize needs.
#[derive(Debug, Clone)]
pub struct TraceData {
    pub path: PathBuf,
    pub dim: usize,
    pub f_true: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub cum_calls: Vec<u64>,
}

pub fn read_trace(path: &Path) -> Result<TraceData, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(4, format!("cannot read trace {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::new(4, format!("{}: empty trace", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    let dim = cols.iter().filter(|c| c.starts_with("x_")).count();
    let idx = |name: &str| -> Result<usize, CliError> {
        cols.iter().position(|c| *c == name).ok_or_else(|| {
            CliError::new(4, format!("{}: missing column {name}", path.display()))
        })
    };
    let f_true_i = idx("f_true")?;
    let grad_i = idx("model_grad_norm")?;
    let calls_i = idx("cum_calls")?;
    let mut data = TraceData {
        path: path.to_path_buf(),
        dim,
        f_true: Vec::new(),
        grad_norm: Vec::new(),
        cum_calls: Vec::new(),
    };
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse_f = |i: usize| -> Result<f64, CliError> {
            fields
                .get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| {
                    CliError::new(
                        4,
                        format!("{}:{}: malformed row", path.display(), lineno + 2),
                    )
                })
        };
        data.f_true.push(parse_f(f_true_i)?);
        data.grad_norm.push(parse_f(grad_i)?);
        data.cum_calls.push(parse_f(calls_i)? as u64);
    }
    Ok(data)
}
