use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{spectral_decompose, DensityMatrix, HermitianOperator, QuantumSystem};
use crate::error::Result;
use crate::linalg::{cmatmul, complexify, CMatrix, RMatrix, C64};

/// Real symmetric Gaussian matrix (X + X^T)/2 with X_ij ~ N(0, 1).
pub fn goe_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RMatrix {
    let x = RMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    (&x + x.transpose()) * 0.5
}

/// G G^H / Tr(G G^H) with G a complex Ginibre matrix.
pub fn random_density_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DensityMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)) * std::f64::consts::FRAC_1_SQRT_2
    });
    let mut rho = cmatmul(&g, &g.adjoint());
    let trace: f64 = (0..n).map(|i| rho[(i, i)].re).sum();
    rho /= C64::new(trace, 0.0);
    rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    DensityMatrix::new(rho).expect("Ginibre construction yields a valid state")
}

/// Which random Hamiltonian to draw in the observable eigenbasis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomEnsemble {
    /// Real symmetric Gaussian; transition matrices are symmetric.
    Orthogonal,
    /// Complex Hermitian Gaussian; transition matrices are only doubly stochastic.
    Unitary,
}

/// Random system with diagonal observable (outcomes 0, 1, ..., N-1), a GOE
/// Hamiltonian in that basis and a Hilbert-Schmidt random initial state.
pub fn random_system(n: usize, seed: u64) -> Result<(QuantumSystem, DensityMatrix)> {
    random_system_with(n, seed, RandomEnsemble::Orthogonal)
}

pub fn random_system_with(n: usize, seed: u64, ensemble: RandomEnsemble) -> Result<(QuantumSystem, DensityMatrix)> {
    assert!(n >= 2, "random systems need N >= 2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = match ensemble {
        RandomEnsemble::Orthogonal => complexify(&goe_matrix(n, &mut rng)),
        RandomEnsemble::Unitary => {
            let x = CMatrix::from_fn(n, n, |_, _| {
                C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
            });
            (&x + x.adjoint()) * C64::new(0.5, 0.0)
        }
    };
    let outcomes: Vec<f64> = (0..n).map(|k| k as f64).collect();
    let observable = HermitianOperator::from_real_diagonal(&outcomes);
    let hamiltonian = spectral_decompose(&h)?;
    let rho0 = random_density_matrix(n, &mut rng);
    Ok((QuantumSystem::new(hamiltonian, observable)?, rho0))
}

/// GOE blocks on consecutive observable indices, so the observable basis
/// splits into invariant subspaces of the given sizes.
pub fn random_block_system(block_dims: &[usize], seed: u64) -> Result<(QuantumSystem, DensityMatrix)> {
    let n: usize = block_dims.iter().sum();
    if block_dims.contains(&0) || n < 2 {
        return Err(crate::error::Error::InvalidConfig(format!("invalid block sizes {block_dims:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = RMatrix::zeros(n, n);
    let mut start = 0;
    for &d in block_dims {
        h.view_mut((start, start), (d, d)).copy_from(&goe_matrix(d, &mut rng));
        start += d;
    }
    let outcomes: Vec<f64> = (0..n).map(|k| k as f64).collect();
    let observable = HermitianOperator::from_real_diagonal(&outcomes);
    let hamiltonian = spectral_decompose(&complexify(&h))?;
    let rho0 = random_density_matrix(n, &mut rng);
    Ok((QuantumSystem::new(hamiltonian, observable)?, rho0))
}
