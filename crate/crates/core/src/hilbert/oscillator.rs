use super::{spectral_decompose, HermitianOperator, QuantumSystem};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::tolerance;
use crate::transition::BlockStructure;

/// Anisotropic 2D oscillator truncated to n_x + n_y ≤ n_max, measured through
/// the pseudo-angular momentum (i/2)(a_x† a_y − a_y† a_x).
#[derive(Clone, Debug)]
pub struct OscillatorSystem {
    pub system: QuantumSystem,
    /// Invariant sectors in the observable basis, one per total quantum number.
    pub blocks: BlockStructure,
    /// Fock labels (n_x, n_y) of the energy-basis storage order.
    pub basis: Vec<(usize, usize)>,
    /// Total quantum number n of each observable eigenvector.
    pub outcome_sector: Vec<usize>,
    pub n_max: usize,
}

/// One invariant sector: total quanta `n` and the observable-basis indices it spans.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sector {
    pub n: usize,
    pub indices: Vec<usize>,
}

/// Fock states ordered by sector n = 0..=n_max, and by decreasing n_x inside a sector.
pub fn fock_basis(n_max: usize) -> Vec<(usize, usize)> {
    (0..=n_max).flat_map(|n| (0..=n).rev().map(move |nx| (nx, n - nx))).collect()
}

/// Matrix of (i/2)(a_x† a_y − a_y† a_x) on `basis`.
pub fn pseudo_angular_momentum(basis: &[(usize, usize)]) -> CMatrix {
    let d = basis.len();
    let index = |state: (usize, usize)| basis.iter().position(|&b| b == state);
    let mut l = CMatrix::zeros(d, d);
    for (col, &(nx, ny)) in basis.iter().enumerate() {
        // a_x† a_y |nx, ny⟩ = sqrt((nx+1) ny) |nx+1, ny-1⟩
        if ny > 0 {
            if let Some(row) = index((nx + 1, ny - 1)) {
                l[(row, col)] += C64::new(0.0, 0.5 * (((nx + 1) * ny) as f64).sqrt());
            }
        }
        // a_y† a_x |nx, ny⟩ = sqrt(nx (ny+1)) |nx-1, ny+1⟩
        if nx > 0 {
            if let Some(row) = index((nx - 1, ny + 1)) {
                l[(row, col)] -= C64::new(0.0, 0.5 * ((nx * (ny + 1)) as f64).sqrt());
            }
        }
    }
    l
}

/// Oscillator with the zero-point energy (ω₁ + ω₂)/2 included.
pub fn oscillator_system(n_max: usize, omega1: f64, omega2: f64) -> Result<OscillatorSystem> {
    oscillator_system_with(n_max, omega1, omega2, true)
}

pub fn oscillator_system_with(n_max: usize, omega1: f64, omega2: f64, zero_point: bool) -> Result<OscillatorSystem> {
    if n_max < 1 {
        return Err(Error::InvalidTruncation(n_max));
    }
    if !(omega1 > 0.0 && omega2 > 0.0 && omega1.is_finite() && omega2.is_finite()) {
        return Err(Error::InvalidConfig(format!("oscillator frequencies must be positive, got {omega1}, {omega2}")));
    }
    let basis = fock_basis(n_max);
    let offset = if zero_point { 0.5 * (omega1 + omega2) } else { 0.0 };
    let energies: Vec<f64> = basis.iter().map(|&(nx, ny)| omega1 * nx as f64 + omega2 * ny as f64 + offset).collect();
    let hamiltonian = HermitianOperator::from_real_diagonal(&energies);
    let observable = spectral_decompose(&pseudo_angular_momentum(&basis))?;

    let vectors = observable.eigenvectors();
    let mut outcome_sector = Vec::with_capacity(basis.len());
    for k in 0..basis.len() {
        let mut weight = vec![0.0; n_max + 1];
        for (row, &(nx, ny)) in basis.iter().enumerate() {
            weight[nx + ny] += vectors[(row, k)].norm_sqr();
        }
        let (n, &w) = weight.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty sector list");
        if 1.0 - w > tolerance::BLOCK_SUPPORT {
            return Err(Error::BlockMismatch { index: k, weight: w });
        }
        outcome_sector.push(n);
    }
    let partition: Vec<Vec<usize>> = (0..=n_max)
        .map(|n| (0..basis.len()).filter(|&k| outcome_sector[k] == n).collect())
        .collect();
    let system = QuantumSystem::new(hamiltonian, observable)?;
    let blocks = BlockStructure::from_partition(&system, partition)?;
    Ok(OscillatorSystem { system, blocks, basis, outcome_sector, n_max })
}

impl OscillatorSystem {
    /// Observable-basis index sets of the sectors n = 0..=n_max.
    pub fn sector_decompose(&self) -> Vec<Sector> {
        (0..=self.n_max)
            .map(|n| Sector { n, indices: (0..self.outcome_sector.len()).filter(|&k| self.outcome_sector[k] == n).collect() })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_c;

    fn sector_block(l: &CMatrix, basis: &[(usize, usize)], n: usize) -> CMatrix {
        let idx: Vec<usize> = (0..basis.len()).filter(|&i| basis[i].0 + basis[i].1 == n).collect();
        CMatrix::from_fn(idx.len(), idx.len(), |a, b| l[(idx[a], idx[b])])
    }

    #[test]
    fn rejects_empty_truncation() {
        assert!(matches!(oscillator_system(0, 1.0, 2.0), Err(Error::InvalidTruncation(0))));
    }

    #[test]
    fn sectors_have_dimension_n_plus_one() {
        let osc = oscillator_system(3, 1.0, 2.5).unwrap();
        let mut dims = osc.blocks.dims();
        dims.sort_unstable();
        assert_eq!(dims, vec![1, 2, 3, 4]);
        let sizes: Vec<usize> = osc.sector_decompose().iter().map(|s| s.indices.len()).collect();
        assert_eq!(sizes, vec![1, 2, 3, 4]);
    }

    #[test]
    fn no_coupling_between_sectors() {
        let basis = fock_basis(4);
        let l = pseudo_angular_momentum(&basis);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                if a.0 + a.1 != b.0 + b.1 {
                    assert_eq!(l[(i, j)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn ground_sector_is_zero() {
        let basis = fock_basis(2);
        let l = pseudo_angular_momentum(&basis);
        assert_eq!(sector_block(&l, &basis, 0)[(0, 0)].norm(), 0.0);
    }

    #[test]
    fn first_sector_is_a_spin_half() {
        let basis = fock_basis(2);
        let l = pseudo_angular_momentum(&basis);
        let op = spectral_decompose(&sector_block(&l, &basis, 1)).unwrap();
        // (i/2)(a_x† a_y − a_y† a_x) restricted to {|1,0⟩, |0,1⟩}
        assert!((op.eigenvalues()[0] + 0.5).abs() < 1e-14);
        assert!((op.eigenvalues()[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn sector_spectra_are_spin_multiplets() {
        let basis = fock_basis(5);
        let l = pseudo_angular_momentum(&basis);
        for n in 0..=5 {
            let op = spectral_decompose(&sector_block(&l, &basis, n)).unwrap();
            for (k, &e) in op.eigenvalues().iter().enumerate() {
                assert!((e - (k as f64 - n as f64 / 2.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn isotropic_case_commutes() {
        let osc = oscillator_system(3, 1.3, 1.3).unwrap();
        assert!(osc.system.commutator_norm() < 1e-14);
        let aniso = oscillator_system(3, 1.0, 2.0).unwrap();
        assert!(aniso.system.commutator_norm() > 0.1);
    }

    #[test]
    fn zero_point_only_shifts() {
        let a = oscillator_system_with(2, 1.0, 3.0, true).unwrap();
        let b = oscillator_system_with(2, 1.0, 3.0, false).unwrap();
        for (x, y) in a.system.energies().iter().zip(b.system.energies()) {
            assert!((x - y - 2.0).abs() < 1e-15);
        }
        assert!(max_abs_c(&(a.system.overlap() - b.system.overlap())) == 0.0);
    }
}
