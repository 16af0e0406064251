//! Heat characteristic functions, spin heat distributions and the
//! predictions for observables with invariant subspaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, HermitianOperator, QuantumSystem, Spin};
use crate::linalg::C64;
use crate::protocol::{HeatEnsemble, PairCounts};
use crate::tolerance;
use crate::transition::BlockStructure;

/// Natural log of the largest finite f64, used as the exponent guard.
const LOG_MAX: f64 = 709.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Empirical,
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub u: C64,
    pub g: C64,
    /// Standard error of the mean; zero for analytic curves.
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicCurve {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
}

impl CharacteristicCurve {
    fn analytic(us: &[C64], f: impl Fn(C64) -> Result<C64>) -> Result<Self> {
        let points = us.iter().map(|&u| Ok(CurvePoint { u, g: f(u)?, stderr: 0.0 })).collect::<Result<_>>()?;
        Ok(CharacteristicCurve { kind: CurveKind::Analytic, points })
    }
}

/// Probability mass function over a finite set of heat values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatPmf {
    support: Vec<f64>,
    probabilities: Vec<f64>,
}

impl HeatPmf {
    pub fn new(support: Vec<f64>, mut probabilities: Vec<f64>) -> Result<Self> {
        if support.len() != probabilities.len() {
            return Err(Error::DimensionMismatch { expected: support.len(), found: probabilities.len() });
        }
        if probabilities.iter().any(|&p| p < -tolerance::TRACE || !p.is_finite()) {
            return Err(Error::InvalidState("negative probability in heat distribution".into()));
        }
        probabilities.iter_mut().for_each(|p| *p = p.max(0.0));
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > tolerance::TRACE {
            return Err(Error::ProbabilityUnderflow { total });
        }
        Ok(HeatPmf { support, probabilities })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Total probability of support points within `tol` of `q`.
    pub fn probability_near(&self, q: f64, tol: f64) -> f64 {
        self.support.iter().zip(&self.probabilities).filter(|(x, _)| (**x - q).abs() <= tol).map(|(_, p)| p).sum()
    }

    /// Σ p(Q) e^{iQu}
    pub fn characteristic(&self, u: C64) -> C64 {
        self.support.iter().zip(&self.probabilities).map(|(&q, &p)| (C64::i() * u * q).exp() * p).sum()
    }
}

/// Mean and standard error of e^{iQu} for every u.
pub fn empirical_g(ens: &HeatEnsemble, us: &[C64]) -> Result<CharacteristicCurve> {
    empirical_g_from_heat(&ens.heat_values(), us)
}

pub fn empirical_g_from_heat(heat: &[f64], us: &[C64]) -> Result<CharacteristicCurve> {
    if heat.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let count = heat.len() as f64;
    let points = us
        .iter()
        .map(|&u| {
            if u.re == 0.0 {
                // u = iε: e^{iQu} = e^{-εQ} is real
                let (mean, se) = mean_and_stderr(heat.iter().map(|&q| (-u.im * q).exp()), count);
                CurvePoint { u, g: C64::new(mean, 0.0), stderr: se }
            } else {
                let mut sum = C64::new(0.0, 0.0);
                let mut sq = 0.0;
                for &q in heat {
                    let z = (C64::i() * u * q).exp();
                    sum += z;
                    sq += z.norm_sqr();
                }
                let mean = sum / count;
                let var = (sq / count - mean.norm_sqr()).max(0.0);
                CurvePoint { u, g: mean, stderr: (var / (count - 1.0).max(1.0)).sqrt() }
            }
        })
        .collect();
    Ok(CharacteristicCurve { kind: CurveKind::Empirical, points })
}

/// Same estimator evaluated from (n, m) counts.
pub fn empirical_g_from_counts(counts: &PairCounts, energies: &[f64], us: &[C64]) -> Result<CharacteristicCurve> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let d = counts.dim;
    let count = total as f64;
    let points = us
        .iter()
        .map(|&u| {
            let mut sum = C64::new(0.0, 0.0);
            let mut sq = 0.0;
            for n in 0..d {
                for m in 0..d {
                    let c = counts.count(n, m) as f64;
                    if c > 0.0 {
                        let z = (C64::i() * u * (energies[m] - energies[n])).exp();
                        sum += z * c;
                        sq += z.norm_sqr() * c;
                    }
                }
            }
            let mean = sum / count;
            let var = (sq / count - mean.norm_sqr()).max(0.0);
            CurvePoint { u, g: mean, stderr: (var / (count - 1.0).max(1.0)).sqrt() }
        })
        .collect();
    Ok(CharacteristicCurve { kind: CurveKind::Empirical, points })
}

fn mean_and_stderr(values: impl Iterator<Item = f64>, count: f64) -> (f64, f64) {
    let (mut sum, mut sq) = (0.0, 0.0);
    for v in values {
        sum += v;
        sq += v * v;
    }
    let mean = sum / count;
    let var = (sq / count - mean * mean).max(0.0) * count / (count - 1.0).max(1.0);
    (mean, (var / count).sqrt())
}

/// ⟨E|ρ₀|E⟩ for each energy eigenvector.
fn energy_populations(h: &HermitianOperator, rho0: &DensityMatrix) -> Result<Vec<f64>> {
    if rho0.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: rho0.dim() });
    }
    Ok(rho0.populations(h.eigenvectors()))
}

/// log Σ_k w_k e^{x_k} with the largest exponent factored out, as (shift, sum).
fn shifted_sum(weights: impl Iterator<Item = (f64, C64)> + Clone) -> (f64, C64) {
    let shift = weights.clone().map(|(_, x)| x.re).fold(f64::NEG_INFINITY, f64::max);
    let sum = weights.map(|(w, x)| (x - shift).exp() * w).sum();
    (shift, sum)
}

fn product_with_guard(a: (f64, C64), b: (f64, C64), scale: f64) -> Result<C64> {
    let log = a.0 + b.0;
    if log > LOG_MAX {
        return Err(Error::Overflow(format!("heat characteristic exponent {log:.1}")));
    }
    Ok(a.1 * b.1 * (log.exp() * scale))
}

/// G(ε) = ⟨e^{-εQ}⟩ = Tr[e^{-εH}] Tr[ρ₀ e^{εH}] / N under full thermalization.
pub fn analytic_g_itt(h: &HermitianOperator, rho0: &DensityMatrix, epsilon: f64) -> Result<f64> {
    Ok(analytic_g_itt_complex(h, rho0, C64::new(0.0, epsilon))?.re)
}

/// G(u) = Tr[e^{iHu}] Tr[ρ₀ e^{-iHu}] / N.
pub fn analytic_g_itt_complex(h: &HermitianOperator, rho0: &DensityMatrix, u: C64) -> Result<C64> {
    let c = energy_populations(h, rho0)?;
    let e = h.eigenvalues();
    let i = C64::i();
    let z = shifted_sum(e.iter().map(|&x| (1.0, i * u * x)));
    let weighted = shifted_sum(e.iter().zip(&c).map(|(&x, &ck)| (ck, -i * u * x)));
    product_with_guard(z, weighted, 1.0 / e.len() as f64)
}

pub fn analytic_curve_itt(h: &HermitianOperator, rho0: &DensityMatrix, us: &[C64]) -> Result<CharacteristicCurve> {
    CharacteristicCurve::analytic(us, |u| analytic_g_itt_complex(h, rho0, u))
}

/// Heat distribution of a spin in H = −ωS_z prepared at inverse temperature β,
/// assuming a uniform final energy, with Q = ωℓ for ℓ = −2s…2s.
pub fn spin_heat_pmf(spin: Spin, omega: f64, beta: f64) -> Result<HeatPmf> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidConfig(format!("omega must be positive, got {omega}")));
    }
    if !beta.is_finite() {
        return Err(Error::Overflow(format!("beta = {beta}")));
    }
    let levels = 2 * spin.twice() as i64;
    let dim = spin.dim() as i64;
    // c_k for E_k = ωk, k = 0…2s, from max-shifted exponents
    let energies: Vec<f64> = (0..dim).map(|k| omega * k as f64).collect();
    let c = crate::hilbert::gibbs_weights(&energies, beta);
    let support: Vec<f64> = (-levels / 2..=levels / 2).map(|l| omega * l as f64).collect();
    let probabilities = (-levels / 2..=levels / 2)
        .map(|l| {
            // initial levels n with n + ℓ inside the spectrum
            let (lo, hi) = (0.max(-l), (dim - 1).min(dim - 1 - l));
            (lo..=hi).map(|n| c[n as usize]).sum::<f64>() / dim as f64
        })
        .collect();
    HeatPmf::new(support, probabilities)
}

/// Long-time populations when each invariant block thermalizes on its own.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialPrediction {
    /// Final observable-outcome distribution π̃_k.
    pub pi_tilde: Vec<f64>,
    /// Final energy distribution p_m.
    pub p_m: Vec<f64>,
    /// Block index of every energy eigenvector.
    pub energy_blocks: Vec<usize>,
}

/// Block of each energy eigenvector, from its overlap weight inside the block.
pub fn energy_block_membership(blocks: &BlockStructure, sys: &QuantumSystem) -> Result<Vec<usize>> {
    let w = sys.overlap_weights();
    let n = sys.dim();
    (0..n)
        .map(|e| {
            let r = (0..n).max_by(|&a, &b| w[(a, e)].total_cmp(&w[(b, e)])).map(|k| blocks.block_of(k)).expect("non-empty");
            let weight: f64 = blocks.partition()[r].iter().map(|&k| w[(k, e)]).sum();
            if 1.0 - weight > tolerance::BLOCK_SUPPORT {
                return Err(Error::BlockMismatch { index: e, weight });
            }
            Ok(r)
        })
        .collect()
}

pub fn partial_itt_predict(blocks: &BlockStructure, sys: &QuantumSystem, rho0: &DensityMatrix) -> Result<PartialPrediction> {
    let energy_blocks = energy_block_membership(blocks, sys)?;
    let pi = rho0.populations(sys.observable().eigenvectors());
    let c = energy_populations(sys.hamiltonian(), rho0)?;
    let dims = blocks.dims();
    let mut block_mass = vec![0.0; blocks.len()];
    for (k, &p) in pi.iter().enumerate() {
        block_mass[blocks.block_of(k)] += p;
    }
    let mut energy_mass = vec![0.0; blocks.len()];
    for (e, &ce) in c.iter().enumerate() {
        energy_mass[energy_blocks[e]] += ce;
    }
    let pi_tilde = (0..sys.dim()).map(|k| block_mass[blocks.block_of(k)] / dims[blocks.block_of(k)] as f64).collect();
    let p_m = (0..sys.dim()).map(|e| energy_mass[energy_blocks[e]] / dims[energy_blocks[e]] as f64).collect();
    Ok(PartialPrediction { pi_tilde, p_m, energy_blocks })
}

/// G(u) = Σ_r (1/d_r) Tr[e^{iH_r u}] Tr[ρ₀ P_r e^{-iH u}].
pub fn partial_g(blocks: &BlockStructure, sys: &QuantumSystem, rho0: &DensityMatrix, us: &[C64]) -> Result<CharacteristicCurve> {
    let energy_blocks = energy_block_membership(blocks, sys)?;
    let c = energy_populations(sys.hamiltonian(), rho0)?;
    let e = sys.energies();
    for (r, h) in blocks.block_hamiltonians().iter().enumerate() {
        let count = energy_blocks.iter().filter(|&&b| b == r).count();
        if count != h.dim() {
            return Err(Error::BlockMismatch { index: r, weight: count as f64 });
        }
    }
    let i = C64::i();
    CharacteristicCurve::analytic(us, |u| {
        let mut total = C64::new(0.0, 0.0);
        for (r, h) in blocks.block_hamiltonians().iter().enumerate() {
            let z = shifted_sum(h.eigenvalues().iter().map(|&x| (1.0, i * u * x)));
            let members = (0..e.len()).filter(|&k| energy_blocks[k] == r);
            let weighted = shifted_sum(members.map(|k| (c[k], -i * u * e[k])));
            total += product_with_guard(z, weighted, 1.0 / h.dim() as f64)?;
        }
        Ok(total)
    })
}
