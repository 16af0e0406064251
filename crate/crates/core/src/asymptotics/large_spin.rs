use serde::{Deserialize, Serialize};

use super::quasi::operator_a;
use crate::error::{Error, Result};
use crate::hilbert::{transverse_spin_system, QuantumSystem, Spin};
use crate::linalg::{self, max_abs, RMatrix};
use crate::transition::{transition_matrix, TransitionMatrix};

/// Curves are said to collapse while their spread stays below this.
pub const COLLAPSE_DISPERSION: f64 = 0.01;

/// Upper end of the x window used for the small-x fit 1 − λ ≈ c x².
pub const QUADRATIC_FIT_MAX_X: f64 = 0.25;

const GRID_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub tau: f64,
    pub k: usize,
    /// τk/2s
    pub x: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingDataset {
    pub spin: Spin,
    pub taus: Vec<f64>,
    pub points: Vec<ScalingPoint>,
    /// (x, population standard deviation of λ across curves reaching x)
    pub dispersion: Vec<(f64, f64)>,
    /// First grid x where the dispersion exceeds `COLLAPSE_DISPERSION`.
    pub critical_x: Option<f64>,
    /// Mean λ of the curves at `critical_x`.
    pub critical_lambda: Option<f64>,
    /// Range of `critical_x` over every subset of at least three τ values.
    pub critical_x_band: Option<(f64, f64)>,
    pub quadratic_coefficient: f64,
}

impl ScalingDataset {
    pub fn curve(&self, tau: f64) -> Vec<ScalingPoint> {
        self.points.iter().copied().filter(|p| p.tau == tau).collect()
    }

    /// Largest dispersion on the grid strictly below `x`.
    pub fn max_dispersion_below(&self, x: f64) -> f64 {
        self.dispersion.iter().filter(|(g, _)| *g < x).map(|&(_, d)| d).fold(0.0, f64::max)
    }
}

fn spectrum_curve(sys: &QuantumSystem, spin: Spin, tau: f64) -> Result<Vec<(f64, f64)>> {
    let l = transition_matrix(sys, tau)?;
    let two_s = spin.twice() as f64;
    Ok(l.spectrum().iter().enumerate().map(|(k, &lambda)| (tau * k as f64 / two_s, lambda)).collect())
}

/// Linear interpolation on a curve sorted by x; `None` outside its range.
fn interpolate(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    let last = curve.last()?;
    if x > last.0 || x < curve[0].0 {
        return None;
    }
    let i = curve.partition_point(|p| p.0 < x);
    if i == 0 {
        return Some(curve[0].1);
    }
    let (x0, y0) = curve[i - 1];
    let (x1, y1) = curve[i];
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// Population spread and mean of the curves that reach x, if at least two do.
fn spread_at(curves: &[&Vec<(f64, f64)>], x: f64) -> Option<(f64, f64)> {
    let vals: Vec<f64> = curves.iter().filter_map(|c| interpolate(c, x)).collect();
    if vals.len() < 2 {
        return None;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((var.sqrt(), mean))
}

fn dispersion_curve(curves: &[&Vec<(f64, f64)>]) -> Vec<(f64, f64, f64)> {
    let x_max = curves.iter().filter_map(|c| c.last()).map(|p| p.0).fold(0.0, f64::max);
    let steps = (x_max / GRID_STEP).floor() as usize;
    (0..=steps)
        .filter_map(|i| {
            let x = i as f64 * GRID_STEP;
            spread_at(curves, x).map(|(sd, mean)| (x, sd, mean))
        })
        .collect()
}

fn first_breakdown(dispersion: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    dispersion.iter().find(|p| p.1 > COLLAPSE_DISPERSION).map(|p| (p.0, p.2))
}

/// Spectra of L(τ) for H = −S_z/s and a measurement of S_x, plotted against
/// x = τk/2s for each τ.
pub fn scaling_collapse(spin: Spin, taus: &[f64]) -> Result<ScalingDataset> {
    if taus.len() < 3 {
        return Err(Error::InsufficientTaus(taus.len()));
    }
    if let Some(&bad) = taus.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::InvalidConfig(format!("waiting time {bad} must be positive")));
    }
    let sys = transverse_spin_system(spin, 1.0, true)?;
    let curves: Vec<Vec<(f64, f64)>> = taus.iter().map(|&tau| spectrum_curve(&sys, spin, tau)).collect::<Result<_>>()?;
    let all: Vec<&Vec<(f64, f64)>> = curves.iter().collect();

    let dispersion = dispersion_curve(&all);
    let breakdown = first_breakdown(&dispersion);

    let mut band: Option<(f64, f64)> = None;
    if taus.len() > 3 {
        for mask in 1u32..(1 << taus.len()) {
            if mask.count_ones() < 3 {
                continue;
            }
            let subset: Vec<&Vec<(f64, f64)>> =
                curves.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, c)| c).collect();
            if let Some((x, _)) = first_breakdown(&dispersion_curve(&subset)) {
                band = Some(band.map_or((x, x), |(lo, hi)| (lo.min(x), hi.max(x))));
            }
        }
    } else {
        band = breakdown.map(|(x, _)| (x, x));
    }

    let mut points = Vec::new();
    for (&tau, curve) in taus.iter().zip(&curves) {
        points.extend(curve.iter().enumerate().map(|(k, &(x, lambda))| ScalingPoint { tau, k, x, lambda }));
    }
    let (num, den) = points
        .iter()
        .filter(|p| p.k > 0 && p.x <= QUADRATIC_FIT_MAX_X)
        .fold((0.0, 0.0), |(n, d), p| (n + p.x * p.x * (1.0 - p.lambda), d + p.x.powi(4)));

    Ok(ScalingDataset {
        spin,
        taus: taus.to_vec(),
        points,
        dispersion: dispersion.iter().map(|p| (p.0, p.1)).collect(),
        critical_x: breakdown.map(|b| b.0),
        critical_lambda: breakdown.map(|b| b.1),
        critical_x_band: band,
        quadratic_coefficient: if den > 0.0 { num / den } else { f64::NAN },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCell {
    pub s: f64,
    pub measurements: u64,
    /// ‖L^M − J/N‖_max
    pub to_uniform: f64,
    /// ‖L^M − 𝕀‖_max
    pub to_identity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EuclideanCell {
    pub s: f64,
    /// M = round(4s²t̃/τ²)
    pub measurements: u64,
    pub t_eff: f64,
    /// ‖L^M − e^{−𝒜t̃}‖_max
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitOrderTable {
    pub tau: f64,
    pub cells: Vec<LimitCell>,
    pub euclidean: Vec<EuclideanCell>,
}

impl LimitOrderTable {
    /// Distances to J/N at fixed s, in increasing M.
    pub fn uniform_trend(&self, s: f64) -> Vec<f64> {
        let mut row: Vec<&LimitCell> = self.cells.iter().filter(|c| c.s == s).collect();
        row.sort_by_key(|c| c.measurements);
        row.iter().map(|c| c.to_uniform).collect()
    }

    /// Distances to 𝕀 at fixed M, in increasing s.
    pub fn identity_trend(&self, measurements: u64) -> Vec<f64> {
        let mut col: Vec<&LimitCell> = self.cells.iter().filter(|c| c.measurements == measurements).collect();
        col.sort_by(|a, b| a.s.total_cmp(&b.s));
        col.iter().map(|c| c.to_identity).collect()
    }

    /// Euclidean-limit errors in increasing s.
    pub fn euclidean_trend(&self) -> Vec<f64> {
        let mut e = self.euclidean.clone();
        e.sort_by(|a, b| a.s.total_cmp(&b.s));
        e.iter().map(|c| c.error).collect()
    }
}

/// e^{−𝒜t} carried into the S_x eigenbasis (ascending outcome a ↔ m = a − s).
fn euclidean_target(spin: Spin, t: f64) -> Result<RMatrix> {
    let in_m = linalg::expm_symmetric(&operator_a(spin), -t)?;
    let n = spin.dim();
    Ok(RMatrix::from_fn(n, n, |a, b| in_m[(n - 1 - a, n - 1 - b)]))
}

/// L(τ)^M for H = −S_z/s and S_x measured, on the (s, M) grid, plus the
/// joint limit with M ∝ s² when `t_eff` is given.
pub fn limit_order_study(spins: &[Spin], ms: &[u64], tau: f64, t_eff: Option<f64>) -> Result<LimitOrderTable> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidConfig(format!("waiting time {tau} must be positive")));
    }
    let mut cells = Vec::new();
    let mut euclidean = Vec::new();
    for &spin in spins {
        let sys = transverse_spin_system(spin, 1.0, true)?;
        let l: TransitionMatrix = transition_matrix(&sys, tau)?;
        let n = spin.dim();
        let uniform = RMatrix::from_element(n, n, 1.0 / n as f64);
        let identity = RMatrix::identity(n, n);
        for &m in ms {
            let lm = l.power(m);
            cells.push(LimitCell {
                s: spin.value(),
                measurements: m,
                to_uniform: max_abs(&(&lm - &uniform)),
                to_identity: max_abs(&(&lm - &identity)),
            });
        }
        if let Some(t) = t_eff {
            let s = spin.value();
            let measurements = (4.0 * s * s * t / (tau * tau)).round() as u64;
            // the rounded M fixes the effective time actually reached
            let reached = measurements as f64 * tau * tau / (4.0 * s * s);
            let error = max_abs(&(l.power(measurements) - euclidean_target(spin, reached)?));
            euclidean.push(EuclideanCell { s, measurements, t_eff: t, error });
        }
    }
    Ok(LimitOrderTable { tau, cells, euclidean })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub k: usize,
    /// S_x outcome labelling the component.
    pub m: f64,
    pub log10_abs: f64,
}

/// log₁₀|v_k(m)| for the eigenvectors of L(τ), k in descending eigenvalue order.
pub fn eigenvector_heatmap(spin: Spin, tau: f64) -> Result<Vec<HeatmapCell>> {
    let sys = transverse_spin_system(spin, 1.0, true)?;
    let l = transition_matrix(&sys, tau)?;
    let basis = l.eigenbasis();
    let outcomes = sys.outcomes();
    let n = spin.dim();
    let mut cells = Vec::with_capacity(n * n);
    for k in 0..n {
        for (a, &m) in outcomes.iter().enumerate() {
            cells.push(HeatmapCell { k, m, log10_abs: basis[(a, k)].abs().max(1e-300).log10() });
        }
    }
    Ok(cells)
}
