//! Goodness-of-fit tools for comparing sampled ensembles with predictions.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn upper_tail(statistic: f64, dof: usize) -> f64 {
    if !statistic.is_finite() {
        return 0.0;
    }
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    dist.sf(statistic)
}

/// Pearson χ² of observed counts against outcome probabilities.
///
/// Bins with zero probability and zero count are dropped; a count in a bin of
/// zero probability gives an infinite statistic.
pub fn chi_square_gof(counts: &[u64], probabilities: &[f64]) -> Result<ChiSquare> {
    if counts.len() != probabilities.len() {
        return Err(Error::DimensionMismatch { expected: probabilities.len(), found: counts.len() });
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let n = total as f64;
    let mut statistic = 0.0;
    let mut bins = 0usize;
    for (&c, &p) in counts.iter().zip(probabilities) {
        if p <= 0.0 {
            if c > 0 {
                statistic = f64::INFINITY;
            }
            continue;
        }
        let e = n * p;
        statistic += (c as f64 - e).powi(2) / e;
        bins += 1;
    }
    let dof = bins.saturating_sub(1);
    Ok(ChiSquare { statistic, dof, p_value: upper_tail(statistic, dof) })
}

/// χ² test of independence on a contingency table; empty rows and columns are ignored.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<ChiSquare> {
    let cols = table.first().map_or(0, Vec::len);
    if let Some(row) = table.iter().find(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch { expected: cols, found: row.len() });
    }
    let row_sums: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let total: u64 = row_sums.iter().sum();
    if total == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let n = total as f64;
    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        for j in 0..cols {
            if row_sums[i] == 0 || col_sums[j] == 0 {
                continue;
            }
            let e = row_sums[i] as f64 * col_sums[j] as f64 / n;
            statistic += (row[j] as f64 - e).powi(2) / e;
        }
    }
    let r = row_sums.iter().filter(|&&s| s > 0).count();
    let c = col_sums.iter().filter(|&&s| s > 0).count();
    let dof = r.saturating_sub(1) * c.saturating_sub(1);
    Ok(ChiSquare { statistic, dof, p_value: upper_tail(statistic, dof) })
}

/// χ² homogeneity test for two count vectors over the same bins.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquare> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    chi_square_independence(&[a.to_vec(), b.to_vec()])
}

/// ½ Σ|p_i − q_i|
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: q.len() });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

pub fn frequencies(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect()
}

/// Per-bin deviations (c − Np)/√(Np(1 − p)) in units of the binomial standard deviation.
pub fn binomial_z_scores(counts: &[u64], probabilities: &[f64]) -> Result<Vec<f64>> {
    if counts.len() != probabilities.len() {
        return Err(Error::DimensionMismatch { expected: probabilities.len(), found: counts.len() });
    }
    let n = counts.iter().sum::<u64>() as f64;
    Ok(counts
        .iter()
        .zip(probabilities)
        .map(|(&c, &p)| {
            let diff = c as f64 - n * p;
            let var = n * p * (1.0 - p);
            if var > 0.0 {
                diff / var.sqrt()
            } else if diff.abs() < 0.5 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            }
        })
        .collect())
}

/// Sample mean and its standard error.
pub fn mean_stderr(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, f64::INFINITY));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
