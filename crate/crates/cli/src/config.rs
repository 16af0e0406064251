//! Experiment parameters from a keyed config file (TOML or JSON) layered under
//! command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use qmonitor::io::SystemDocument;
use qmonitor::protocol::WaitingTime;

use crate::error::{config_err, CliResult};
use crate::presets::Preset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Histogram,
    GCurve,
    Spectrum,
    Collapse,
    Convergence,
    Zeno,
    Quasi,
    Limits,
    Oscillator,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Histogram => "histogram",
            Analysis::GCurve => "g_curve",
            Analysis::Spectrum => "spectrum",
            Analysis::Collapse => "collapse",
            Analysis::Convergence => "convergence",
            Analysis::Zeno => "zeno",
            Analysis::Quasi => "quasi",
            Analysis::Limits => "limits",
            Analysis::Oscillator => "oscillator",
        }
    }

    /// Outputs produced by `simulate` rather than `analyze`.
    pub fn is_ensemble_output(self) -> bool {
        matches!(self, Analysis::Histogram | Analysis::GCurve)
    }
}

/// A system given by file path or inline in the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSource {
    Path(PathBuf),
    Inline(Box<SystemDocument>),
}

impl SystemSource {
    pub fn load(&self) -> CliResult<SystemDocument> {
        match self {
            SystemSource::Inline(doc) => Ok((**doc).clone()),
            SystemSource::Path(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_err(format!("cannot read system file {}: {e}", path.display())))?;
                Ok(SystemDocument::from_json(&text)?)
            }
        }
    }
}

fn parse_system_path(s: &str) -> Result<SystemSource, String> {
    Ok(SystemSource::Path(PathBuf::from(s)))
}

/// Every experiment knob. Unset fields fall back to the preset, then to the
/// command defaults.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Experiment name recorded in the manifest
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// System document (JSON) with H, O and rho0
    #[arg(long, value_name = "FILE", value_parser = parse_system_path)]
    pub system: Option<SystemSource>,
    #[arg(skip)]
    pub analysis: Vec<Analysis>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    #[serde(alias = "output_dir")]
    pub output: Option<PathBuf>,
    /// Seed of the Monte Carlo streams
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed used to draw random presets
    #[arg(long)]
    pub system_seed: Option<u64>,
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Worker threads; defaults to the available cores
    #[arg(long)]
    pub workers: Option<usize>,
    /// Dimension of a random system
    #[arg(long = "N")]
    #[serde(alias = "N")]
    pub n: Option<usize>,
    /// Number of intermediate measurements
    #[arg(long = "M")]
    #[serde(alias = "M")]
    pub measurements: Option<usize>,
    /// Fixed waiting time between measurements
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(skip)]
    pub waiting: Option<WaitingTime>,
    /// Inverse temperature of a thermal initial state
    #[arg(long)]
    pub beta: Option<f64>,
    /// Spin quantum number(s)
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<f64>>,
    #[arg(long)]
    pub omega: Option<f64>,
    /// Second oscillator frequency
    #[arg(long)]
    pub omega2: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    #[arg(long)]
    pub total_time: Option<f64>,
    /// List of measurement counts
    #[arg(long = "Ms", value_delimiter = ',')]
    #[serde(alias = "Ms")]
    pub ms: Option<Vec<usize>>,
    /// Oscillator truncation n_x + n_y <= nmax
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Tilt angles of the quasi-commuting family
    #[arg(long, value_delimiter = ',')]
    pub xis: Option<Vec<f64>>,
    /// Effective Euclidean time
    #[arg(long)]
    pub t_eff: Option<f64>,
    /// Spins for the Legendre eigenvector check
    #[arg(long, value_delimiter = ',')]
    pub legendre_s: Option<Vec<f64>>,
}

macro_rules! overlay {
    ($base:expr, $top:expr; $($f:ident),*) => {
        Params { $($f: $top.$f.or($base.$f),)* analysis: if $top.analysis.is_empty() { $base.analysis } else { $top.analysis } }
    };
}

impl Params {
    /// Fields set in `top` win over those in `self`.
    pub fn overlay(self, top: Params) -> Params {
        overlay!(self, top; name, preset, system, output, seed, system_seed, realizations, workers, n, measurements,
            tau, waiting, beta, s, omega, omega2, taus, total_time, ms, nmax, xis, t_eff, legendre_s)
    }

    pub fn single_spin(&self) -> CliResult<Option<f64>> {
        match self.s.as_deref() {
            None => Ok(None),
            Some([s]) => Ok(Some(*s)),
            Some(list) => Err(config_err(format!("expected a single spin, got {list:?}"))),
        }
    }
}

/// Reads a config file; `.json` files and files starting with `{` are JSON, the rest TOML.
pub fn load_config(path: &Path) -> CliResult<Params> {
    let text =
        std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, path.extension().is_some_and(|e| e == "json"))
}

pub fn parse_config(text: &str, json: bool) -> CliResult<Params> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(config_err("configuration file is empty"));
    }
    let mut params: Params = if json || trimmed.starts_with('{') {
        serde_json::from_str(trimmed).map_err(|e| config_err(format!("invalid JSON config: {e}")))?
    } else {
        toml::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))?
    };
    if let Some(SystemSource::Path(p)) = &params.system {
        if p.as_os_str().is_empty() {
            params.system = None;
        }
    }
    Ok(params)
}
