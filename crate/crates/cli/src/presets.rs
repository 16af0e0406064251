use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::config::Params;

/// Named parameter sets for the standard experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Random five-level system, M = 20, tau = 1
    Fig1a,
    /// Random fifteen-level system, M = 20, tau = 1
    Fig1b,
    /// Spin 7/2 in a field along z, S_x measured
    Spin72,
    /// Spectral collapse at s = 300
    Fig4,
}

/// Ensemble size used unless overridden.
pub const DEFAULT_REALIZATIONS: usize = 100_000;

/// Seed of the random Hamiltonian and initial state of the fig1 presets.
pub const DEFAULT_SYSTEM_SEED: u64 = 1;

pub const DEFAULT_SEED: u64 = 20240;

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1a => "fig1a",
            Preset::Fig1b => "fig1b",
            Preset::Spin72 => "spin72",
            Preset::Fig4 => "fig4",
        }
    }

    pub fn params(self) -> Params {
        let base = Params {
            preset: Some(self),
            realizations: Some(DEFAULT_REALIZATIONS),
            system_seed: Some(DEFAULT_SYSTEM_SEED),
            tau: Some(1.0),
            ..Default::default()
        };
        match self {
            Preset::Fig1a => Params { n: Some(5), measurements: Some(20), ..base },
            Preset::Fig1b => Params { n: Some(15), measurements: Some(20), ..base },
            Preset::Spin72 => Params { s: Some(vec![3.5]), omega: Some(1.0), measurements: Some(25), beta: Some(0.5), ..base },
            Preset::Fig4 => Params { s: Some(vec![300.0]), taus: Some(vec![0.5, 1.0, 2.0, 4.0]), ..base },
        }
    }
}
