use serde::{Deserialize, Serialize};

use super::{spectral_decompose, HermitianOperator, QuantumSystem};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Spin quantum number stored as 2s, so half-integers are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub fn new(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !twice.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-12 || twice > u32::MAX as f64 {
            return Err(Error::InvalidSpin(s));
        }
        Ok(Spin { twice: twice.round() as u32 })
    }

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::InvalidSpin(0.0));
        }
        Ok(Spin { twice })
    }

    pub fn value(&self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn twice(&self) -> u32 {
        self.twice
    }

    /// Hilbert-space dimension 2s + 1.
    pub fn dim(&self) -> usize {
        self.twice as usize + 1
    }

    /// Basis labels in storage order: m = s, s-1, ..., -s.
    pub fn m_values(&self) -> Vec<f64> {
        let s = self.value();
        (0..self.dim()).map(|i| s - i as f64).collect()
    }
}

impl TryFrom<f64> for Spin {
    type Error = Error;
    fn try_from(s: f64) -> Result<Self> {
        Spin::new(s)
    }
}

impl From<Spin> for f64 {
    fn from(s: Spin) -> f64 {
        s.value()
    }
}

impl std::fmt::Display for Spin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.twice.is_multiple_of(2) {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Raw angular-momentum matrices in the S_z eigenbasis (m = s, ..., -s).
#[derive(Clone, Debug)]
pub struct SpinMatrices {
    pub x: CMatrix,
    pub y: CMatrix,
    pub z: CMatrix,
}

pub fn spin_matrices(spin: Spin) -> SpinMatrices {
    let n = spin.dim();
    let s = spin.value();
    let m = spin.m_values();
    let mut x = CMatrix::zeros(n, n);
    let mut y = CMatrix::zeros(n, n);
    let mut z = CMatrix::zeros(n, n);
    for i in 0..n {
        z[(i, i)] = C64::new(m[i], 0.0);
    }
    // S+ |m⟩ = sqrt(s(s+1) - m(m+1)) |m+1⟩, and |m+1⟩ sits at index i-1
    for i in 1..n {
        let mi = m[i];
        let raise = (s * (s + 1.0) - mi * (mi + 1.0)).sqrt();
        x[(i - 1, i)] = C64::new(raise / 2.0, 0.0);
        x[(i, i - 1)] = C64::new(raise / 2.0, 0.0);
        y[(i - 1, i)] = C64::new(0.0, -raise / 2.0);
        y[(i, i - 1)] = C64::new(0.0, raise / 2.0);
    }
    SpinMatrices { x, y, z }
}

#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub x: HermitianOperator,
    pub y: HermitianOperator,
    pub z: HermitianOperator,
}

pub fn spin_operators(spin: Spin) -> Result<SpinOperators> {
    let mats = spin_matrices(spin);
    Ok(SpinOperators {
        x: spectral_decompose(&mats.x)?,
        y: spectral_decompose(&mats.y)?,
        z: spectral_decompose(&mats.z)?,
    })
}

/// Spin in a field along z, optionally measured along a tilted axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinParameters {
    pub spin: Spin,
    pub omega: f64,
    /// Tilt of the measurement axis away from z, towards x.
    pub xi: f64,
    /// Use H = -S_z/s instead of H = -ω S_z.
    pub scaled: bool,
}

pub fn spin_hamiltonian(params: &SpinParameters) -> HermitianOperator {
    let s = params.spin.value();
    let factor = if params.scaled { 1.0 / s } else { params.omega };
    let diag: Vec<f64> = params.spin.m_values().iter().map(|&m| -factor * m).collect();
    HermitianOperator::from_real_diagonal(&diag)
}

/// sin(ξ) S_x + cos(ξ) S_z
pub fn tilted_observable(params: &SpinParameters) -> Result<HermitianOperator> {
    let mats = spin_matrices(params.spin);
    let (sin, cos) = params.xi.sin_cos();
    let op = mats.x * C64::new(sin, 0.0) + mats.z * C64::new(cos, 0.0);
    spectral_decompose(&op)
}

pub fn tilted_spin_system(params: &SpinParameters) -> Result<QuantumSystem> {
    QuantumSystem::new(spin_hamiltonian(params), tilted_observable(params)?)
}

/// Field along z, measurement of S_x; `scaled` picks H = -S_z/s over H = -ω S_z.
pub fn transverse_spin_system(spin: Spin, omega: f64, scaled: bool) -> Result<QuantumSystem> {
    let params = SpinParameters { spin, omega, xi: std::f64::consts::FRAC_PI_2, scaled };
    let observable = spectral_decompose(&spin_matrices(spin).x)?;
    QuantumSystem::new(spin_hamiltonian(&params), observable)
}
