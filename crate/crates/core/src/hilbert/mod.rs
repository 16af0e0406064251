//! Hamiltonians, observables, states and the example systems built from them.

mod oscillator;
mod random;
mod spin;

pub use oscillator::{oscillator_system, OscillatorSystem};
pub use random::{goe_matrix, random_block_system, random_density_matrix, random_system, random_system_with, RandomEnsemble};
pub use spin::{
    spin_hamiltonian, spin_matrices, spin_operators, tilted_observable, tilted_spin_system,
    transverse_spin_system, Spin, SpinMatrices, SpinOperators, SpinParameters,
};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix, C64};
use crate::tolerance;

/// A Hermitian matrix together with its ascending spectral decomposition.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    matrix: CMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

/// Diagonalizes `op`, checking Hermiticity, orthonormality and reconstruction.
///
/// Degenerate clusters (gaps below `1e-8` times the spectral range) are
/// re-orthogonalized after the solve.
pub fn spectral_decompose(op: &CMatrix) -> Result<HermitianOperator> {
    if op.nrows() != op.ncols() {
        return Err(Error::DimensionMismatch { expected: op.nrows(), found: op.ncols() });
    }
    let scale = linalg::max_abs_c(op).max(1.0);
    let defect = linalg::hermitian_defect(op);
    if defect > tolerance::HERMITIAN * scale {
        return Err(Error::NotHermitian { defect });
    }
    let (eigenvalues, mut eigenvectors) = linalg::eigh(op)?;
    let range = eigenvalues.last().copied().unwrap_or(0.0) - eigenvalues.first().copied().unwrap_or(0.0);
    linalg::orthonormalize_clusters(&eigenvalues, &mut eigenvectors, tolerance::DEGENERACY_REL * range);
    let hermitian = (op + op.adjoint()) * C64::new(0.5, 0.0);
    HermitianOperator::from_parts(hermitian, eigenvalues, eigenvectors)
}

impl HermitianOperator {
    /// Assembles an operator from known spectral data, validating all invariants.
    pub fn from_parts(matrix: CMatrix, eigenvalues: Vec<f64>, eigenvectors: CMatrix) -> Result<Self> {
        let n = matrix.nrows();
        if eigenvalues.len() != n || eigenvectors.nrows() != n || eigenvectors.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: eigenvalues.len() });
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig("eigenvalues must be ascending".into()));
        }
        let orth = linalg::unitarity_defect(&eigenvectors);
        if orth > tolerance::ORTHONORMAL {
            return Err(Error::NotUnitary { what: "eigenvector matrix", defect: orth });
        }
        let op = HermitianOperator { matrix, eigenvalues, eigenvectors };
        let scale = linalg::max_abs_c(&op.matrix).max(1.0);
        let recon = linalg::max_abs_c(&(op.reconstruct() - &op.matrix));
        if recon > tolerance::RECONSTRUCTION * scale {
            return Err(Error::ConvergenceFailure("spectral reconstruction exceeds tolerance"));
        }
        Ok(op)
    }

    /// Real diagonal operator; the eigenbasis is the permuted standard basis.
    pub fn from_real_diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut eigenvectors = CMatrix::zeros(n, n);
        for (col, &row) in order.iter().enumerate() {
            eigenvectors[(row, col)] = C64::new(1.0, 0.0);
        }
        HermitianOperator {
            matrix: CMatrix::from_diagonal(&DVector::from_iterator(n, values.iter().map(|&v| C64::new(v, 0.0)))),
            eigenvalues: order.iter().map(|&i| values[i]).collect(),
            eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn spectral_range(&self) -> f64 {
        match (self.eigenvalues.first(), self.eigenvalues.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }

    pub fn degeneracy_tolerance(&self) -> f64 {
        tolerance::DEGENERACY_REL * self.spectral_range()
    }

    /// Index ranges of (numerically) degenerate eigenvalue clusters.
    pub fn degenerate_clusters(&self) -> Vec<std::ops::Range<usize>> {
        linalg::clusters(&self.eigenvalues, self.degeneracy_tolerance())
    }

    /// f(A) = Σ_k f(a_k) |a_k⟩⟨a_k|
    pub fn apply_function(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.dim();
        let weights: Vec<C64> = self.eigenvalues.iter().map(|&a| f(a)).collect();
        let scaled = CMatrix::from_fn(n, n, |i, j| self.eigenvectors[(i, j)] * weights[j]);
        linalg::cmatmul(&scaled, &self.eigenvectors.adjoint())
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply_function(|a| C64::new(a, 0.0))
    }

    /// ‖[A, B]‖_max
    pub fn commutator_norm(&self, other: &HermitianOperator) -> f64 {
        let ab = linalg::cmatmul(&self.matrix, &other.matrix);
        let ba = linalg::cmatmul(&other.matrix, &self.matrix);
        linalg::max_abs_c(&(ab - ba))
    }
}

/// A validated density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let defect = linalg::hermitian_defect(&matrix);
        if defect > tolerance::HERMITIAN {
            return Err(Error::NotHermitian { defect });
        }
        let trace: f64 = (0..matrix.nrows()).map(|i| matrix[(i, i)].re).sum();
        if (trace - 1.0).abs() > tolerance::TRACE {
            return Err(Error::InvalidState(format!("trace {trace} differs from 1")));
        }
        let (values, _) = linalg::eigh(&matrix)?;
        if let Some(&min) = values.first() {
            if min < -tolerance::PSD {
                return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
            }
        }
        Ok(DensityMatrix { matrix })
    }

    pub fn maximally_mixed(n: usize) -> Self {
        DensityMatrix { matrix: CMatrix::identity(n, n) * C64::new(1.0 / n as f64, 0.0) }
    }

    /// Diagonal state in the basis given by the columns of `basis`.
    pub fn from_populations(populations: &[f64], basis: &CMatrix) -> Result<Self> {
        let n = basis.nrows();
        if populations.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: populations.len() });
        }
        let total: f64 = populations.iter().sum();
        let scaled = CMatrix::from_fn(n, n, |i, j| basis[(i, j)] * (populations[j] / total));
        let mut m = linalg::cmatmul(&scaled, &basis.adjoint());
        m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        DensityMatrix::new(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// ⟨b_k|ρ|b_k⟩ for every column b_k of `basis`.
    pub fn populations(&self, basis: &CMatrix) -> Vec<f64> {
        let rb = linalg::cmatmul(&self.matrix, basis);
        (0..basis.ncols())
            .map(|k| basis.column(k).dotc(&rb.column(k)).re.max(0.0))
            .collect()
    }
}

/// Hamiltonian, observable, and their overlap matrix V_{k,l} = ⟨α_k|E_l⟩.
#[derive(Clone, Debug)]
pub struct QuantumSystem {
    hamiltonian: HermitianOperator,
    observable: HermitianOperator,
    overlap: CMatrix,
}

impl QuantumSystem {
    pub fn new(hamiltonian: HermitianOperator, observable: HermitianOperator) -> Result<Self> {
        if hamiltonian.dim() != observable.dim() {
            return Err(Error::DimensionMismatch { expected: hamiltonian.dim(), found: observable.dim() });
        }
        let overlap = linalg::cmatmul(&observable.eigenvectors.adjoint(), &hamiltonian.eigenvectors);
        let defect = linalg::unitarity_defect(&overlap);
        if defect > tolerance::ORTHONORMAL {
            return Err(Error::NotUnitary { what: "overlap matrix", defect });
        }
        Ok(QuantumSystem { hamiltonian, observable, overlap })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    pub fn observable(&self) -> &HermitianOperator {
        &self.observable
    }

    pub fn energies(&self) -> &[f64] {
        self.hamiltonian.eigenvalues()
    }

    pub fn outcomes(&self) -> &[f64] {
        self.observable.eigenvalues()
    }

    pub fn overlap(&self) -> &CMatrix {
        &self.overlap
    }

    /// |⟨α_k|E_l⟩|², rows indexed by observable outcome, columns by energy level.
    pub fn overlap_weights(&self) -> RMatrix {
        self.overlap.map(|z| z.norm_sqr())
    }

    /// H expressed in the observable eigenbasis, V diag(E) V^H.
    pub fn hamiltonian_in_observable_basis(&self) -> CMatrix {
        let n = self.dim();
        let e = self.energies();
        let scaled = CMatrix::from_fn(n, n, |i, j| self.overlap[(i, j)] * e[j]);
        linalg::cmatmul(&scaled, &self.overlap.adjoint())
    }

    /// ‖[H, O]‖_max
    pub fn commutator_norm(&self) -> f64 {
        self.hamiltonian.commutator_norm(&self.observable)
    }
}

/// Gibbs state e^{-βH}/Z built in the energy eigenbasis with shifted exponents.
pub fn thermal_state(h: &HermitianOperator, beta: f64) -> Result<DensityMatrix> {
    if !beta.is_finite() {
        return Err(Error::Overflow(format!("beta = {beta}")));
    }
    let e = h.eigenvalues();
    let weights = gibbs_weights(e, beta);
    DensityMatrix::from_populations(&weights, h.eigenvectors())
}

/// Normalized Boltzmann weights e^{-β E_k}/Z, computed with a max shift.
pub fn gibbs_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let shift = energies.iter().map(|&e| -beta * e).fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = energies.iter().map(|&e| (-beta * e - shift).exp()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn identity_spectrum() {
        let op = spectral_decompose(&CMatrix::identity(3, 3)).unwrap();
        assert_eq!(op.eigenvalues(), &[1.0, 1.0, 1.0]);
        assert!(linalg::unitarity_defect(op.eigenvectors()) < 1e-14);
    }

    #[test]
    fn diagonal_spectrum_is_permuted_basis() {
        let m = CMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0), c(-1.0), c(0.0)]));
        let op = spectral_decompose(&m).unwrap();
        assert_eq!(op.eigenvalues(), &[-1.0, 0.0, 2.0]);
        let v = op.eigenvectors();
        assert_eq!(v[(1, 0)], c(1.0));
        assert_eq!(v[(2, 1)], c(1.0));
        assert_eq!(v[(0, 2)], c(1.0));
    }

    #[test]
    fn random_hermitian_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 8;
        let x = CMatrix::from_fn(n, n, |_, _| {
            C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        let h = (&x + x.adjoint()) * c(0.5);
        let op = spectral_decompose(&h).unwrap();
        assert!(linalg::max_abs_c(&(op.reconstruct() - &h)) < 1e-10);
        assert!(op.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = c(1.0);
        assert!(matches!(spectral_decompose(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn degenerate_cluster_is_orthonormal() {
        // rank-one perturbation of the identity leaves a 3-fold degenerate space
        let v = DVector::from_vec(vec![c(1.0), c(2.0), c(-1.0), c(0.5)]);
        let m = CMatrix::identity(4, 4) + &v * v.adjoint();
        let op = spectral_decompose(&m).unwrap();
        assert_eq!(op.degenerate_clusters().len(), 2);
        assert!(linalg::unitarity_defect(op.eigenvectors()) < 1e-12);
    }

    #[test]
    fn infinite_temperature_state_is_uniform() {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.5, 4.0]);
        let rho = thermal_state(&h, 0.0).unwrap();
        assert!(linalg::max_abs_c(&(rho.matrix() - DensityMatrix::maximally_mixed(4).matrix())) < 1e-15);
    }

    #[test]
    fn cold_state_is_ground_projector() {
        let h = HermitianOperator::from_real_diagonal(&[3.0, -1.0, 2.0]);
        let rho = thermal_state(&h, 800.0).unwrap();
        assert!((rho.matrix()[(1, 1)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn huge_beta_does_not_overflow() {
        let h = HermitianOperator::from_real_diagonal(&[-1e3, 0.0, 1e3]);
        let rho = thermal_state(&h, -5e3).unwrap();
        assert!((rho.matrix()[(2, 2)].re - 1.0).abs() < 1e-12);
        assert!(matches!(thermal_state(&h, f64::INFINITY), Err(Error::Overflow(_))));
    }

    #[test]
    fn spin_seven_halves_gibbs_populations() {
        let params = SpinParameters { spin: Spin::new(3.5).unwrap(), omega: 1.0, xi: 0.0, scaled: false };
        let h = spin_hamiltonian(&params);
        let rho = thermal_state(&h, 0.5).unwrap();
        let m = Spin::new(3.5).unwrap().m_values();
        let z: f64 = m.iter().map(|&m| (0.5 * m).exp()).sum();
        for (i, &mi) in m.iter().enumerate() {
            assert!((rho.matrix()[(i, i)].re - (0.5 * mi).exp() / z).abs() < 1e-14);
        }
    }

    #[test]
    fn thermal_state_commutes_with_hamiltonian() {
        let (sys, _) = random_system(6, 4).unwrap();
        let rho = thermal_state(sys.hamiltonian(), 0.7).unwrap();
        let h = sys.hamiltonian().matrix();
        let comm = linalg::cmatmul(h, rho.matrix()) - linalg::cmatmul(rho.matrix(), h);
        assert!(linalg::max_abs_c(&comm) < 1e-12);
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = CMatrix::identity(2, 2) * c(0.5);
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[(0, 0)] = c(0.6);
        assert!(matches!(DensityMatrix::new(m.clone()), Err(Error::InvalidState(_))));
        m[(0, 0)] = c(1.5);
        m[(1, 1)] = c(-0.5);
        assert!(matches!(DensityMatrix::new(m), Err(Error::InvalidState(_))));
    }
}
