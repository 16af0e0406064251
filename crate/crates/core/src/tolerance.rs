//! Numerical tolerances used by the validity checks.
//!
//! Absolute tolerances apply to quantities of order one; the Hermiticity,
//! reconstruction and degeneracy checks are scaled with the matrix magnitude.

/// Hermiticity defect, relative to max(1, ‖A‖_max).
pub const HERMITIAN: f64 = 1e-10;
/// Orthonormality of eigenvector columns and unitarity of overlaps.
pub const ORTHONORMAL: f64 = 1e-10;
/// Spectral reconstruction defect, relative to max(1, ‖A‖_max).
pub const RECONSTRUCTION: f64 = 1e-10;
/// Trace of a density matrix.
pub const TRACE: f64 = 1e-12;
/// Smallest admissible density-matrix eigenvalue is -PSD.
pub const PSD: f64 = 1e-10;
/// Degeneracy clustering, relative to the spectral range.
pub const DEGENERACY_REL: f64 = 1e-8;
/// Row and column sums of transition matrices.
pub const STOCHASTIC: f64 = 1e-10;
/// Symmetry of transition matrices.
pub const SYMMETRIC: f64 = 1e-10;
/// Eigenvalues of transition matrices must lie in [-1 - EIGEN, 1 + EIGEN].
pub const EIGEN: f64 = 1e-10;
/// Eigenvalue window around +1 and -1 used by fixed-point detection.
pub const UNIT_EIGEN: f64 = 1e-8;
/// Edge threshold for the support graph used in block detection.
pub const SUPPORT: f64 = 1e-12;
/// Merge tolerance for heat values, relative to the energy range.
pub const HEAT_MERGE_REL: f64 = 1e-9;
/// Allowed deviation of a sampling distribution from unit mass.
pub const SAMPLING_MASS: f64 = 1e-8;
/// Block support check for energy eigenvectors.
pub const BLOCK_SUPPORT: f64 = 1e-8;
