//! Limit regimes of long measurement sequences: relaxation to the fixed
//! point, Zeno freezing, the quasi-commuting Euclidean limit and large spins.

mod large_spin;
mod quasi;

pub use large_spin::{
    eigenvector_heatmap, limit_order_study, scaling_collapse, EuclideanCell, HeatmapCell, LimitCell, LimitOrderTable,
    ScalingDataset, ScalingPoint, COLLAPSE_DISPERSION, QUADRATIC_FIT_MAX_X,
};
pub use quasi::{
    a_spectral_check, delta_from_generator, delta_operator, euclidean_compare, extract_generator_r, legendre,
    operator_a, EffectiveEvolution, EuclideanPoint, Generator, LegendreReport, LegendreRow, QuasiMember,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hilbert::QuantumSystem;
use crate::linalg::{max_abs, RMatrix};
use crate::protocol::WaitingTime;
use crate::transition::{fixed_point, transition_matrix, TransitionMatrix};

/// Distances below this are treated as converged and left out of rate fits.
pub const FIT_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub ms: Vec<usize>,
    /// ‖L(τ_M)⋯L(τ_1) − P_limit‖_max for each M.
    pub distances: Vec<f64>,
    /// Slope of ln(distance) against M.
    pub fitted_rate: Option<f64>,
    /// ln of the largest modulus among eigenvalues away from ±1 (fixed τ only).
    pub predicted_rate: Option<f64>,
    pub multiplicity: usize,
    pub antiperiodic_multiplicity: usize,
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Seed of the waiting-time sequence drawn for random-τ convergence studies.
const CONVERGENCE_SEED: u64 = 0xC0_4E_26_E5;

/// Relaxation of M-fold products of transition matrices towards P₊ + (−1)^M P₋.
///
/// Random waiting times are drawn once from a fixed seed; the M-th product
/// reuses the first M factors of that sequence.
pub fn itt_convergence(sys: &QuantumSystem, waiting: &WaitingTime, ms: &[usize]) -> Result<ConvergenceReport> {
    waiting.validate()?;
    let max_m = ms.iter().copied().max().unwrap_or(0);
    let mut distances = Vec::with_capacity(ms.len());
    let (multiplicity, antiperiodic, predicted) = match waiting {
        WaitingTime::Fixed { tau } => {
            let l = transition_matrix(sys, *tau)?;
            let fp = fixed_point(&l);
            for &m in ms {
                distances.push(max_abs(&(l.power(m as u64) - fp.limit(m as u64))));
            }
            let sub = l.subleading_modulus();
            (fp.multiplicity, fp.antiperiodic_multiplicity, (sub > 0.0).then(|| sub.ln()))
        }
        WaitingTime::Zeno { total_time } => {
            // τ = T/M changes with M, so each M gets its own matrix
            let mut mult = (0, 0);
            for &m in ms {
                let l = transition_matrix(sys, total_time / m as f64)?;
                let fp = fixed_point(&l);
                mult = (fp.multiplicity, fp.antiperiodic_multiplicity);
                distances.push(max_abs(&(l.power(m as u64) - fp.limit(m as u64))));
            }
            (mult.0, mult.1, None)
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(CONVERGENCE_SEED);
            let factors: Vec<TransitionMatrix> = (0..max_m)
                .map(|_| transition_matrix(sys, waiting_sample(waiting, &mut rng)))
                .collect::<Result<_>>()?;
            let fp = fixed_point(&factors[0]);
            let mut product = RMatrix::identity(sys.dim(), sys.dim());
            let mut done = 0;
            let mut sorted: Vec<(usize, usize)> = ms.iter().copied().enumerate().map(|(i, m)| (m, i)).collect();
            sorted.sort_unstable();
            distances = vec![0.0; ms.len()];
            for (m, slot) in sorted {
                while done < m {
                    product = factors[done].matrix() * &product;
                    done += 1;
                }
                distances[slot] = max_abs(&(&product - &fp.projector));
            }
            (fp.multiplicity, 0, None)
        }
    };
    let (x, y): (Vec<f64>, Vec<f64>) = ms
        .iter()
        .zip(&distances)
        .filter(|(_, &d)| d > FIT_FLOOR)
        .map(|(&m, &d)| (m as f64, d.ln()))
        .unzip();
    Ok(ConvergenceReport {
        ms: ms.to_vec(),
        distances,
        fitted_rate: fit_slope(&x, &y),
        predicted_rate: predicted,
        multiplicity,
        antiperiodic_multiplicity: antiperiodic,
    })
}

fn waiting_sample(waiting: &WaitingTime, rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    use rand_distr::{Distribution, Exp};
    match *waiting {
        WaitingTime::Uniform { low, high } => rng.random_range(low..high),
        WaitingTime::Exponential { mean } => Exp::new(1.0 / mean).expect("validated mean").sample(rng),
        WaitingTime::Fixed { tau } => tau,
        WaitingTime::Zeno { total_time } => total_time,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZenoReport {
    pub total_time: f64,
    pub ms: Vec<usize>,
    /// ‖L(T/M)^M − 𝕀‖_max
    pub deviations: Vec<f64>,
    /// Slope of ln D against ln M; −1 in the Zeno regime.
    pub slope: Option<f64>,
}

pub fn zeno_analysis(sys: &QuantumSystem, total_time: f64, ms: &[usize]) -> Result<ZenoReport> {
    WaitingTime::Zeno { total_time }.validate()?;
    let n = sys.dim();
    let deviations = ms
        .iter()
        .map(|&m| {
            let l = transition_matrix(sys, total_time / m as f64)?;
            Ok(max_abs(&(l.power(m as u64) - RMatrix::identity(n, n))))
        })
        .collect::<Result<Vec<_>>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = ms
        .iter()
        .zip(&deviations)
        .filter(|(_, &d)| d > FIT_FLOOR)
        .map(|(&m, &d)| ((m as f64).ln(), d.ln()))
        .unzip();
    Ok(ZenoReport { total_time, ms: ms.to_vec(), deviations, slope: fit_slope(&x, &y) })
}

/// Slope of ln‖L(τ) − 𝕀‖_max against ln τ for a single interval; 2 for short τ.
pub fn short_time_order(sys: &QuantumSystem, taus: &[f64]) -> Result<Option<f64>> {
    let n = sys.dim();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &tau in taus {
        let d = max_abs(&(transition_matrix(sys, tau)?.matrix() - RMatrix::identity(n, n)));
        if d > FIT_FLOOR {
            x.push(tau.ln());
            y.push(d.ln());
        }
    }
    Ok(fit_slope(&x, &y))
}
