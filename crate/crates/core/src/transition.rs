//! Unistochastic transition matrices between successive observable outcomes.
//!
//! `L_{k,l}(τ) = |⟨α_k|e^{-iHτ}|α_l⟩|²` is the probability of reading outcome
//! `k` after outcome `l` when the two measurements are a time `τ` apart.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hilbert::{spectral_decompose, HermitianOperator, QuantumSystem};
use crate::linalg::{self, CMatrix, RMatrix, C64};
use crate::tolerance;

/// Seed of the extra waiting times mixed into block detection.
const BLOCK_PROBE_SEED: u64 = 0x5EED_B10C;
const BLOCK_PROBE_COUNT: usize = 8;

/// U(τ) = e^{-iHτ} in the basis where `h` was given.
pub fn propagator(h: &HermitianOperator, tau: f64) -> CMatrix {
    h.apply_function(|e| C64::from_polar(1.0, -e * tau))
}

/// U(τ) in the observable eigenbasis, V Λ(τ) V^H.
pub fn propagator_in_observable_basis(sys: &QuantumSystem, tau: f64) -> CMatrix {
    let v = sys.overlap();
    let n = sys.dim();
    let phases: Vec<C64> = sys.energies().iter().map(|&e| C64::from_polar(1.0, -e * tau)).collect();
    let scaled = CMatrix::from_fn(n, n, |i, j| v[(i, j)] * phases[j]);
    linalg::cmatmul(&scaled, &v.adjoint())
}

/// Raw |U_{k,l}(τ)|² without validation or spectral data.
pub fn unistochastic_weights(sys: &QuantumSystem, tau: f64) -> RMatrix {
    propagator_in_observable_basis(sys, tau).map(|z| z.norm_sqr())
}

/// Doubly stochastic symmetric matrix with its descending spectral decomposition.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    tau: f64,
    matrix: RMatrix,
    spectrum: Vec<f64>,
    eigenbasis: RMatrix,
}

/// Largest deviation of a row or column sum from 1.
pub fn stochastic_deviation(m: &RMatrix) -> f64 {
    let rows = m.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max);
    let cols = m.column_iter().map(|c| (c.sum() - 1.0).abs()).fold(0.0, f64::max);
    rows.max(cols)
}

pub fn transition_matrix(sys: &QuantumSystem, tau: f64) -> Result<TransitionMatrix> {
    TransitionMatrix::from_matrix(tau, unistochastic_weights(sys, tau))
}

impl TransitionMatrix {
    /// Validates `matrix` and diagonalizes it with the real symmetric solver.
    pub fn from_matrix(tau: f64, mut matrix: RMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let n = matrix.nrows();
        matrix.iter_mut().for_each(|x| {
            if *x < 0.0 && *x > -tolerance::STOCHASTIC {
                *x = 0.0;
            }
        });
        if matrix.iter().any(|&x| x < 0.0) {
            return Err(Error::StochasticityViolation { deviation: -matrix.min() });
        }
        let deviation = stochastic_deviation(&matrix);
        if deviation > tolerance::STOCHASTIC {
            return Err(Error::StochasticityViolation { deviation });
        }
        let defect = linalg::symmetric_defect(&matrix);
        if defect > tolerance::SYMMETRIC {
            return Err(Error::Asymmetric { defect });
        }
        let (mut values, vectors) = linalg::eigh_real(&matrix)?;
        values.reverse();
        let mut eigenbasis = RMatrix::zeros(n, n);
        for j in 0..n {
            eigenbasis.set_column(j, &vectors.column(n - 1 - j));
        }
        if values.iter().any(|&l| l.abs() > 1.0 + tolerance::EIGEN) || (values[0] - 1.0).abs() > tolerance::EIGEN {
            return Err(Error::ConvergenceFailure("transition spectrum outside [-1, 1]"));
        }
        let uniform = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
        if (&matrix * &uniform - &uniform).amax() > tolerance::EIGEN {
            return Err(Error::ConvergenceFailure("uniform vector is not a fixed point"));
        }
        Ok(TransitionMatrix { tau, matrix, spectrum: values, eigenbasis })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.matrix
    }

    /// Eigenvalues λ_0 ≥ λ_1 ≥ ...
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Orthonormal eigenvectors as columns, matching `spectrum`.
    pub fn eigenbasis(&self) -> &RMatrix {
        &self.eigenbasis
    }

    /// L^steps through the eigendecomposition.
    pub fn power(&self, steps: u64) -> RMatrix {
        let p = steps.min(i32::MAX as u64) as i32;
        if steps > i32::MAX as u64 {
            return linalg::spectral_function(&self.spectrum, &self.eigenbasis, |l| l.powf(steps as f64));
        }
        linalg::spectral_function(&self.spectrum, &self.eigenbasis, |l| l.powi(p))
    }

    /// Largest |λ| among eigenvalues away from ±1; sets the approach to the limit.
    pub fn subleading_modulus(&self) -> f64 {
        self.spectrum
            .iter()
            .map(|l| l.abs())
            .filter(|&a| (a - 1.0).abs() > tolerance::UNIT_EIGEN)
            .fold(0.0, f64::max)
    }
}

/// Ordered product of transition matrices with its accumulated stochastic drift.
#[derive(Clone, Debug)]
pub struct ChainProduct {
    pub matrix: RMatrix,
    pub stochastic_deviation: f64,
}

/// `ls[last] ⋯ ls[1] ls[0]`: the first element acts first.
///
/// Identical factors are raised to a power through the eigendecomposition.
pub fn chain_product(ls: &[TransitionMatrix]) -> Result<ChainProduct> {
    let first = ls.first().ok_or_else(|| Error::InvalidConfig("empty transition chain".into()))?;
    let n = first.dim();
    if let Some(bad) = ls.iter().find(|l| l.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: bad.dim() });
    }
    let matrix = if ls.iter().all(|l| l.matrix == first.matrix) {
        first.power(ls.len() as u64)
    } else {
        ls.iter().skip(1).fold(first.matrix.clone(), |acc, l| &l.matrix * acc)
    };
    let deviation = stochastic_deviation(&matrix);
    if deviation > ls.len() as f64 * tolerance::STOCHASTIC {
        return Err(Error::StochasticityViolation { deviation });
    }
    Ok(ChainProduct { matrix, stochastic_deviation: deviation })
}

/// Eigenspaces of L at λ = 1 and λ = -1.
#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub multiplicity: usize,
    pub projector: RMatrix,
    pub antiperiodic_multiplicity: usize,
    pub antiperiodic_projector: RMatrix,
}

impl FixedPoint {
    /// Large-power limit of L^steps: P₊ + (-1)^steps P₋.
    pub fn limit(&self, steps: u64) -> RMatrix {
        if steps.is_multiple_of(2) {
            &self.projector + &self.antiperiodic_projector
        } else {
            &self.projector - &self.antiperiodic_projector
        }
    }
}

pub fn fixed_point(l: &TransitionMatrix) -> FixedPoint {
    let n = l.dim();
    let projector_onto = |target: f64| {
        let mut p = RMatrix::zeros(n, n);
        let mut count = 0;
        for (j, &lam) in l.spectrum.iter().enumerate() {
            if (lam - target).abs() <= tolerance::UNIT_EIGEN {
                let w = l.eigenbasis.column(j);
                p += w * w.transpose();
                count += 1;
            }
        }
        (count, p)
    };
    let (multiplicity, projector) = projector_onto(1.0);
    let (antiperiodic_multiplicity, antiperiodic_projector) = projector_onto(-1.0);
    FixedPoint { multiplicity, projector, antiperiodic_multiplicity, antiperiodic_projector }
}

/// Invariant subspaces shared by H and the observable, in the observable basis.
#[derive(Clone, Debug)]
pub struct BlockStructure {
    partition: Vec<Vec<usize>>,
    block_hamiltonians: Vec<HermitianOperator>,
    membership: Vec<usize>,
}

impl BlockStructure {
    /// Builds H_r for each index set of `partition` (observable-basis indices).
    pub fn from_partition(sys: &QuantumSystem, mut partition: Vec<Vec<usize>>) -> Result<Self> {
        let n = sys.dim();
        let mut membership = vec![usize::MAX; n];
        partition.iter_mut().for_each(|set| set.sort_unstable());
        partition.sort_by_key(|set| set.first().copied());
        for (r, set) in partition.iter().enumerate() {
            for &k in set {
                if k >= n || membership[k] != usize::MAX {
                    return Err(Error::InvalidConfig(format!("index {k} repeated or out of range in block partition")));
                }
                membership[k] = r;
            }
        }
        if membership.contains(&usize::MAX) {
            return Err(Error::InvalidConfig("block partition does not cover every index".into()));
        }
        let h = sys.hamiltonian_in_observable_basis();
        let block_hamiltonians = partition
            .iter()
            .map(|set| {
                let d = set.len();
                spectral_decompose(&CMatrix::from_fn(d, d, |a, b| h[(set[a], set[b])]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockStructure { partition, block_hamiltonians, membership })
    }

    pub fn partition(&self) -> &[Vec<usize>] {
        &self.partition
    }

    pub fn block_hamiltonians(&self) -> &[HermitianOperator] {
        &self.block_hamiltonians
    }

    pub fn len(&self) -> usize {
        self.partition.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partition.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.partition.iter().map(Vec::len).collect()
    }

    /// Block containing observable-basis index `k`.
    pub fn block_of(&self, k: usize) -> usize {
        self.membership[k]
    }

    /// Largest entry of `m` coupling different blocks.
    pub fn off_block_max(&self, m: &RMatrix) -> f64 {
        let n = m.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                if self.membership[i] != self.membership[j] {
                    worst = worst.max(m[(i, j)].abs());
                }
            }
        }
        worst
    }

    /// Projector onto the λ = 1 eigenspace predicted by the blocks.
    pub fn uniform_projector(&self) -> RMatrix {
        let n = self.membership.len();
        RMatrix::from_fn(n, n, |i, j| {
            if self.membership[i] == self.membership[j] {
                1.0 / self.partition[self.membership[i]].len() as f64
            } else {
                0.0
            }
        })
    }
}

/// The waiting times probed by `block_decompose`: `taus` plus a fixed
/// pseudo-random set scaled to the inverse spectral range.
pub fn block_probe_taus(sys: &QuantumSystem, taus: &[f64]) -> Vec<f64> {
    let range = sys.hamiltonian().spectral_range();
    let unit = if range > 0.0 { 1.0 / range } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(BLOCK_PROBE_SEED);
    let mut out = taus.to_vec();
    out.extend((0..BLOCK_PROBE_COUNT).map(|_| unit * rng.random_range(0.3..3.3)));
    out
}

/// Connected components of the support graph of L(τ) over the probed waiting times.
pub fn block_decompose(sys: &QuantumSystem, taus: &[f64]) -> Result<BlockStructure> {
    if taus.is_empty() {
        return Err(Error::InvalidConfig("block detection needs at least one tau".into()));
    }
    let n = sys.dim();
    let mut support = RMatrix::zeros(n, n);
    for tau in block_probe_taus(sys, taus) {
        let w = unistochastic_weights(sys, tau);
        support.zip_apply(&w, |acc, x| *acc = acc.max(x));
    }
    let partition = linalg::components(n, |i, j| support[(i, j)] > tolerance::SUPPORT);
    BlockStructure::from_partition(sys, partition)
}
