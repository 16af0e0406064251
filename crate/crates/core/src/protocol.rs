//! The two-point-measurement protocol with M intermediate measurements of the
//! observable, sampled as stochastic trajectories or enumerated exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::heat_stats::HeatPmf;
use crate::hilbert::{DensityMatrix, QuantumSystem};
use crate::linalg::{RMatrix, C64};
use crate::tolerance;
use crate::transition::{stochastic_deviation, unistochastic_weights, TransitionMatrix};

/// Largest N and M accepted by the path enumeration in `exact_distribution`.
pub const EXACT_MAX_DIM: usize = 6;
pub const EXACT_MAX_MEASUREMENTS: usize = 6;

/// Distribution of the waiting times between consecutive observable measurements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WaitingTime {
    Fixed { tau: f64 },
    Uniform { low: f64, high: f64 },
    Exponential { mean: f64 },
    /// Total time T shared equally, τ = T/M.
    Zeno { total_time: f64 },
}

impl WaitingTime {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            WaitingTime::Fixed { tau } => tau.is_finite() && tau > 0.0,
            WaitingTime::Uniform { low, high } => low.is_finite() && high.is_finite() && low > 0.0 && high > low,
            WaitingTime::Exponential { mean } => mean.is_finite() && mean > 0.0,
            WaitingTime::Zeno { total_time } => total_time.is_finite() && total_time > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid waiting-time specification {self:?}")))
        }
    }

    /// The common τ when every interval is the same, for `measurements` measurements.
    pub fn fixed_tau(&self, measurements: usize) -> Option<f64> {
        match *self {
            WaitingTime::Fixed { tau } => Some(tau),
            WaitingTime::Zeno { total_time } => Some(total_time / measurements as f64),
            _ => None,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WaitingTime::Uniform { low, high } => rng.random_range(low..high),
            WaitingTime::Exponential { mean } => Exp::new(1.0 / mean).expect("validated mean").sample(rng),
            WaitingTime::Fixed { tau } => tau,
            WaitingTime::Zeno { .. } => unreachable!("Zeno intervals are fixed"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Number M of observable measurements between the two energy measurements.
    pub measurements: usize,
    pub waiting: WaitingTime,
    pub ensemble_size: usize,
    pub seed: u64,
    /// Keep the full outcome sequence k₁…k_M of every trajectory.
    #[serde(default)]
    pub record_outcomes: bool,
}

impl ProtocolConfig {
    pub fn fixed(measurements: usize, tau: f64, ensemble_size: usize, seed: u64) -> Self {
        ProtocolConfig { measurements, waiting: WaitingTime::Fixed { tau }, ensemble_size, seed, record_outcomes: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.measurements < 1 {
            return Err(Error::InvalidConfig("at least one measurement is required".into()));
        }
        if self.ensemble_size < 1 {
            return Err(Error::InvalidConfig("ensemble size must be positive".into()));
        }
        self.waiting.validate()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// SHA-256 over the bit patterns of H and the observable.
pub fn system_fingerprint(sys: &QuantumSystem) -> String {
    let mut hasher = Sha256::new();
    hasher.update((sys.dim() as u64).to_le_bytes());
    for m in [sys.hamiltonian().matrix(), sys.observable().matrix()] {
        for z in m.iter() {
            hasher.update(z.re.to_bits().to_le_bytes());
            hasher.update(z.im.to_bits().to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Initial energy index.
    pub n: usize,
    pub outcomes: Option<Vec<usize>>,
    /// Last observable outcome k_M.
    pub final_outcome: usize,
    /// Final energy index.
    pub m: usize,
    /// E_m − E_n.
    pub q: f64,
}

/// Counts of (n, m) energy-index pairs, row-major in n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairCounts {
    pub dim: usize,
    pub counts: Vec<u64>,
}

impl PairCounts {
    pub fn new(dim: usize) -> Self {
        PairCounts { dim, counts: vec![0; dim * dim] }
    }

    pub fn record(&mut self, n: usize, m: usize) {
        self.counts[n * self.dim + m] += 1;
    }

    fn merge(mut self, other: PairCounts) -> PairCounts {
        self.counts.iter_mut().zip(other.counts).for_each(|(a, b)| *a += b);
        self
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, n: usize, m: usize) -> u64 {
        self.counts[n * self.dim + m]
    }

    pub fn initial_counts(&self) -> Vec<u64> {
        (0..self.dim).map(|n| (0..self.dim).map(|m| self.count(n, m)).sum()).collect()
    }

    pub fn final_counts(&self) -> Vec<u64> {
        (0..self.dim).map(|m| (0..self.dim).map(|n| self.count(n, m)).sum()).collect()
    }

    /// Contingency table as rows n, columns m.
    pub fn table(&self) -> Vec<Vec<u64>> {
        (0..self.dim).map(|n| (0..self.dim).map(|m| self.count(n, m)).collect()).collect()
    }

    pub fn heat_histogram(&self, levels: &HeatLevels) -> Vec<HeatBin> {
        let mut counts = vec![0u64; levels.values.len()];
        for (pair, &c) in self.counts.iter().enumerate() {
            counts[levels.pair_level[pair]] += c;
        }
        let total = self.total().max(1) as f64;
        levels
            .values
            .iter()
            .zip(counts)
            .map(|(&q, count)| HeatBin { q, count, probability: count as f64 / total })
            .collect()
    }
}

/// Distinct heat values E_m − E_n, merged when closer than `1e-9` times the energy range.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatLevels {
    pub values: Vec<f64>,
    /// Level index of each pair, row-major in n.
    pub pair_level: Vec<usize>,
}

pub fn heat_levels(energies: &[f64]) -> HeatLevels {
    let n = energies.len();
    let range = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max) - energies.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = tolerance::HEAT_MERGE_REL * range;
    let mut pairs: Vec<(f64, usize)> = (0..n * n).map(|p| (energies[p % n] - energies[p / n], p)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut values = Vec::new();
    let mut pair_level = vec![0; n * n];
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].0 - pairs[end - 1].0 <= tol {
            end += 1;
        }
        let cluster = &pairs[start..end];
        // pairs with n = m give exactly zero; prefer that over a rounded mean
        let value = if cluster.iter().any(|&(q, _)| q == 0.0) {
            0.0
        } else {
            cluster.iter().map(|&(q, _)| q).sum::<f64>() / cluster.len() as f64
        };
        for &(_, p) in cluster {
            pair_level[p] = values.len();
        }
        values.push(value);
        start = end;
    }
    HeatLevels { values, pair_level }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatBin {
    pub q: f64,
    pub count: u64,
    pub probability: f64,
}

/// Trajectory records together with the data needed to interpret them.
#[derive(Clone, Debug)]
pub struct HeatEnsemble {
    pub records: Vec<TrajectoryRecord>,
    pub energies: Vec<f64>,
    pub config: ProtocolConfig,
    pub system_fingerprint: String,
    pub config_fingerprint: String,
}

impl HeatEnsemble {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn heat_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.q).collect()
    }

    pub fn pair_counts(&self) -> PairCounts {
        let mut counts = PairCounts::new(self.energies.len());
        self.records.iter().for_each(|r| counts.record(r.n, r.m));
        counts
    }

    pub fn histogram(&self) -> Vec<HeatBin> {
        self.pair_counts().heat_histogram(&heat_levels(&self.energies))
    }
}

/// Cumulative distribution over indices `0..len`.
#[derive(Clone, Debug)]
struct Cumulative(Vec<f64>);

impl Cumulative {
    fn new(weights: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut acc = 0.0;
        let cum: Vec<f64> = weights
            .into_iter()
            .map(|w| {
                acc += w.max(0.0);
                acc
            })
            .collect();
        if (acc - 1.0).abs() > tolerance::SAMPLING_MASS {
            return Err(Error::ProbabilityUnderflow { total: acc });
        }
        Ok(Cumulative(cum))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.0.last().expect("non-empty distribution");
        let u = rng.random::<f64>() * total;
        let idx = self.0.partition_point(|&c| c <= u);
        if idx < self.0.len() {
            return idx;
        }
        // u rounded onto the total: fall back to the last index with positive mass
        let mut k = self.0.len() - 1;
        while k > 0 && self.0[k] == self.0[k - 1] {
            k -= 1;
        }
        k
    }
}

/// Precomputed sampling tables for one (system, state, config) triple.
#[derive(Clone, Debug)]
pub struct Sampler<'a> {
    sys: &'a QuantumSystem,
    config: ProtocolConfig,
    initial: Cumulative,
    /// first[n]: distribution of k₁ given energy index n.
    first: Vec<Cumulative>,
    /// last[k]: distribution of m given final outcome k.
    last: Vec<Cumulative>,
    /// step[l]: distribution of the next outcome given l, when τ is fixed.
    step: Option<Vec<Cumulative>>,
}

impl<'a> Sampler<'a> {
    pub fn new(sys: &'a QuantumSystem, rho0: &DensityMatrix, config: &ProtocolConfig) -> Result<Self> {
        config.validate()?;
        let n = sys.dim();
        if rho0.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: rho0.dim() });
        }
        let w = sys.overlap_weights();
        let populations = rho0.populations(sys.hamiltonian().eigenvectors());
        let initial = Cumulative::new(populations)?;
        let first = (0..n).map(|e| Cumulative::new(w.column(e).iter().copied())).collect::<Result<_>>()?;
        let last = (0..n).map(|k| Cumulative::new(w.row(k).iter().copied())).collect::<Result<_>>()?;
        let step = match config.waiting.fixed_tau(config.measurements) {
            Some(tau) if config.measurements > 1 => {
                let l = unistochastic_weights(sys, tau);
                let deviation = stochastic_deviation(&l);
                if deviation > tolerance::STOCHASTIC {
                    return Err(Error::StochasticityViolation { deviation });
                }
                Some((0..n).map(|c| Cumulative::new(l.column(c).iter().copied())).collect::<Result<_>>()?)
            }
            _ => None,
        };
        Ok(Sampler { sys, config: config.clone(), initial, first, last, step })
    }

    /// Column l of L(τ), O(N²).
    fn transition_column(&self, l: usize, tau: f64) -> Result<Cumulative> {
        let v = self.sys.overlap();
        let n = self.sys.dim();
        let weights: Vec<C64> = (0..n)
            .map(|j| C64::from_polar(1.0, -self.sys.energies()[j] * tau) * v[(l, j)].conj())
            .collect();
        Cumulative::new((0..n).map(|k| (0..n).map(|j| v[(k, j)] * weights[j]).sum::<C64>().norm_sqr()))
    }

    /// One trajectory driven by the substream `stream` of the configured seed.
    pub fn trajectory(&self, stream: u64) -> Result<TrajectoryRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(stream);
        let n = self.initial.sample(&mut rng);
        let mut k = self.first[n].sample(&mut rng);
        let mut outcomes = self.config.record_outcomes.then(|| {
            let mut v = Vec::with_capacity(self.config.measurements);
            v.push(k);
            v
        });
        for _ in 1..self.config.measurements {
            k = match &self.step {
                Some(table) => table[k].sample(&mut rng),
                None => {
                    let tau = self.config.waiting.sample(&mut rng);
                    self.transition_column(k, tau)?.sample(&mut rng)
                }
            };
            if let Some(v) = outcomes.as_mut() {
                v.push(k);
            }
        }
        let m = self.last[k].sample(&mut rng);
        let e = self.sys.energies();
        Ok(TrajectoryRecord { n, outcomes, final_outcome: k, m, q: e[m] - e[n] })
    }
}

pub fn run_trajectory(sys: &QuantumSystem, rho0: &DensityMatrix, config: &ProtocolConfig, stream: u64) -> Result<TrajectoryRecord> {
    Sampler::new(sys, rho0, config)?.trajectory(stream)
}

fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

pub fn run_ensemble(sys: &QuantumSystem, rho0: &DensityMatrix, config: &ProtocolConfig) -> Result<HeatEnsemble> {
    run_ensemble_with_workers(sys, rho0, config, None)
}

/// Trajectory i always uses substream i, so the result does not depend on `workers`.
pub fn run_ensemble_with_workers(
    sys: &QuantumSystem,
    rho0: &DensityMatrix,
    config: &ProtocolConfig,
    workers: Option<usize>,
) -> Result<HeatEnsemble> {
    let sampler = Sampler::new(sys, rho0, config)?;
    let records = in_pool(workers, || {
        (0..config.ensemble_size as u64)
            .into_par_iter()
            .map(|i| sampler.trajectory(i))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(HeatEnsemble {
        records,
        energies: sys.energies().to_vec(),
        config: config.clone(),
        system_fingerprint: system_fingerprint(sys),
        config_fingerprint: config.fingerprint(),
    })
}

/// (n, m) counts of an ensemble, accumulated in per-worker partials without storing records.
pub fn run_pair_counts(
    sys: &QuantumSystem,
    rho0: &DensityMatrix,
    config: &ProtocolConfig,
    workers: Option<usize>,
) -> Result<PairCounts> {
    let sampler = Sampler::new(sys, rho0, config)?;
    let n = sys.dim();
    in_pool(workers, || {
        (0..config.ensemble_size as u64)
            .into_par_iter()
            .try_fold(
                || PairCounts::new(n),
                |mut acc, i| {
                    let r = sampler.trajectory(i)?;
                    acc.record(r.n, r.m);
                    Ok::<_, Error>(acc)
                },
            )
            .try_reduce(|| PairCounts::new(n), |a, b| Ok(a.merge(b)))
    })?
}

/// Exact law of a fixed-τ protocol.
#[derive(Clone, Debug)]
pub struct ExactDistribution {
    pub dim: usize,
    /// P(n, k_M, m) at index (n·N + k_M)·N + m.
    pub joint: Vec<f64>,
    pub heat: HeatPmf,
}

impl ExactDistribution {
    pub fn joint(&self, n: usize, k: usize, m: usize) -> f64 {
        self.joint[(n * self.dim + k) * self.dim + m]
    }

    /// P(n, m) summed over k_M, row-major in n.
    pub fn pair_probabilities(&self) -> Vec<f64> {
        let d = self.dim;
        (0..d * d).map(|p| (0..d).map(|k| self.joint(p / d, k, p % d)).sum()).collect()
    }

    pub fn final_energy(&self) -> Vec<f64> {
        let pairs = self.pair_probabilities();
        (0..self.dim).map(|m| (0..self.dim).map(|n| pairs[n * self.dim + m]).sum()).collect()
    }

    pub fn final_outcome(&self) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|k| (0..d).flat_map(|n| (0..d).map(move |m| (n, m))).map(|(n, m)| self.joint(n, k, m)).sum()).collect()
    }
}

fn heat_pmf_from_pairs(energies: &[f64], pairs: &[f64]) -> Result<HeatPmf> {
    let levels = heat_levels(energies);
    let mut probabilities = vec![0.0; levels.values.len()];
    for (p, &w) in pairs.iter().enumerate() {
        probabilities[levels.pair_level[p]] += w;
    }
    HeatPmf::new(levels.values, probabilities)
}

struct ExactInputs {
    c: Vec<f64>,
    w: RMatrix,
    l: RMatrix,
}

fn exact_inputs(sys: &QuantumSystem, rho0: &DensityMatrix, measurements: usize, tau: f64) -> Result<ExactInputs> {
    if measurements < 1 {
        return Err(Error::InvalidConfig("at least one measurement is required".into()));
    }
    if rho0.dim() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), found: rho0.dim() });
    }
    let l = unistochastic_weights(sys, tau);
    let deviation = stochastic_deviation(&l);
    if deviation > tolerance::STOCHASTIC {
        return Err(Error::StochasticityViolation { deviation });
    }
    Ok(ExactInputs { c: rho0.populations(sys.hamiltonian().eigenvectors()), w: sys.overlap_weights(), l })
}

/// Brute-force sum over all N^M outcome paths; bounded to N, M ≤ 6.
pub fn exact_distribution(sys: &QuantumSystem, rho0: &DensityMatrix, measurements: usize, tau: f64) -> Result<ExactDistribution> {
    let d = sys.dim();
    if d > EXACT_MAX_DIM || measurements > EXACT_MAX_MEASUREMENTS {
        return Err(Error::TooLarge { dim: d, measurements });
    }
    let ExactInputs { c, w, l } = exact_inputs(sys, rho0, measurements, tau)?;
    let mut joint = vec![0.0; d * d * d];
    let mut path = vec![0usize; measurements];
    let paths = d.pow(measurements as u32);
    for code in 0..paths {
        let mut rest = code;
        for slot in path.iter_mut() {
            *slot = rest % d;
            rest /= d;
        }
        let chain: f64 = path.windows(2).map(|p| l[(p[1], p[0])]).product();
        if chain == 0.0 {
            continue;
        }
        let (k1, km) = (path[0], path[measurements - 1]);
        for n in 0..d {
            let head = c[n] * w[(k1, n)] * chain;
            for m in 0..d {
                joint[(n * d + km) * d + m] += head * w[(km, m)];
            }
        }
    }
    finish_exact(sys, d, joint)
}

/// Same law as `exact_distribution` through L^{M−1}, at cost O(N³ log M) and no size limit.
pub fn exact_distribution_fast(sys: &QuantumSystem, rho0: &DensityMatrix, measurements: usize, tau: f64) -> Result<ExactDistribution> {
    let d = sys.dim();
    let ExactInputs { c, w, l } = exact_inputs(sys, rho0, measurements, tau)?;
    let power = matrix_power(&l, measurements - 1);
    let mut joint = vec![0.0; d * d * d];
    for n in 0..d {
        for km in 0..d {
            let reach: f64 = (0..d).map(|k1| power[(km, k1)] * w[(k1, n)]).sum::<f64>() * c[n];
            for m in 0..d {
                joint[(n * d + km) * d + m] = reach * w[(km, m)];
            }
        }
    }
    finish_exact(sys, d, joint)
}

fn finish_exact(sys: &QuantumSystem, d: usize, joint: Vec<f64>) -> Result<ExactDistribution> {
    let pairs: Vec<f64> = (0..d * d).map(|p| (0..d).map(|k| joint[((p / d) * d + k) * d + p % d]).sum()).collect();
    let heat = heat_pmf_from_pairs(sys.energies(), &pairs)?;
    Ok(ExactDistribution { dim: d, joint, heat })
}

/// Repeated squaring; works for non-symmetric stochastic matrices as well.
fn matrix_power(l: &RMatrix, mut p: usize) -> RMatrix {
    let n = l.nrows();
    let mut result = RMatrix::identity(n, n);
    let mut base = l.clone();
    while p > 0 {
        if p & 1 == 1 {
            result = &base * &result;
        }
        base = &base * &base;
        p >>= 1;
    }
    result
}

/// Distribution of k_M given k₁ for fixed τ, (L^{M−1})_{k_M, k₁}.
pub fn conditional_outcomes(l: &TransitionMatrix, measurements: usize) -> RMatrix {
    l.power(measurements.saturating_sub(1) as u64)
}
