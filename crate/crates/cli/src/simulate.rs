use std::path::PathBuf;

use serde_json::{json, Value};

use qmonitor::heat_stats::{analytic_curve_itt, empirical_g, partial_g, spin_heat_pmf, CharacteristicCurve};
use qmonitor::hilbert::{random_system, thermal_state, transverse_spin_system, DensityMatrix, QuantumSystem, Spin};
use qmonitor::io::{self, gnuplot, CsvTable, Field};
use qmonitor::linalg::C64;
use qmonitor::protocol::{exact_distribution_fast, run_ensemble_with_workers, HeatEnsemble, ProtocolConfig, WaitingTime};
use qmonitor::stats::{binomial_z_scores, chi_square_gof, frequencies, total_variation};
use qmonitor::transition::block_decompose;

use crate::config::{Analysis, Params};
use crate::error::{config_err, CliResult};
use crate::output::OutputDir;
use crate::presets::{Preset, DEFAULT_REALIZATIONS, DEFAULT_SEED, DEFAULT_SYSTEM_SEED};

/// Real arguments u = iε of the characteristic function, ε on 21 points in [−1, 1].
pub fn epsilon_grid() -> Vec<C64> {
    (-10..=10).map(|i| C64::new(0.0, i as f64 / 10.0)).collect()
}

pub struct Setup {
    pub system: QuantumSystem,
    pub rho0: DensityMatrix,
    /// Spin and field strength for the spin family.
    pub spin: Option<(Spin, f64)>,
    pub label: String,
}

/// The system named by `--system`, `--s` or `--N`, in that order of priority.
pub fn build_system(p: &Params) -> CliResult<Setup> {
    let thermal = |sys: &QuantumSystem, fallback: DensityMatrix| -> CliResult<DensityMatrix> {
        Ok(match p.beta {
            Some(beta) => thermal_state(sys.hamiltonian(), beta)?,
            None => fallback,
        })
    };
    if let Some(source) = &p.system {
        let (system, rho0) = source.load()?.to_system()?;
        let rho0 = thermal(&system, rho0)?;
        return Ok(Setup { label: format!("N={}", system.dim()), system, rho0, spin: None });
    }
    if let Some(s) = p.single_spin()? {
        let spin = Spin::new(s)?;
        let omega = p.omega.unwrap_or(1.0);
        let system = transverse_spin_system(spin, omega, false)?;
        let rho0 = thermal_state(system.hamiltonian(), p.beta.unwrap_or(0.0))?;
        return Ok(Setup { system, rho0, spin: Some((spin, omega)), label: format!("s={spin}") });
    }
    let n = p.n.ok_or_else(|| config_err("no system given: use --system, --s or --N"))?;
    if n < 2 {
        return Err(config_err("N must be at least 2"));
    }
    let (system, rho0) = random_system(n, p.system_seed.unwrap_or(DEFAULT_SYSTEM_SEED))?;
    let rho0 = thermal(&system, rho0)?;
    Ok(Setup { system, rho0, spin: None, label: format!("N={n}") })
}

pub fn protocol_config(p: &Params) -> CliResult<ProtocolConfig> {
    let measurements = p.measurements.ok_or_else(|| config_err("number of measurements (--M) is required"))?;
    let waiting = match (p.waiting, p.tau) {
        (Some(w), _) => w,
        (None, Some(tau)) => WaitingTime::Fixed { tau },
        (None, None) => return Err(config_err("waiting time (--tau or [waiting]) is required")),
    };
    let config = ProtocolConfig {
        measurements,
        waiting,
        ensemble_size: p.realizations.unwrap_or(DEFAULT_REALIZATIONS),
        seed: p.seed.unwrap_or(DEFAULT_SEED),
        record_outcomes: false,
    };
    config.validate()?;
    Ok(config)
}

fn energies_table(ens: &HeatEnsemble, exact: Option<&[f64]>) -> CsvTable {
    let counts = ens.pair_counts();
    let (initial, last) = (counts.initial_counts(), counts.final_counts());
    let (pi, pf) = (frequencies(&initial), frequencies(&last));
    let mut t = CsvTable::new(&[
        "k",
        "E_k",
        "initial_count",
        "final_count",
        "initial_probability",
        "final_probability",
        "exact_final_probability",
    ]);
    for (k, &e) in ens.energies.iter().enumerate() {
        t.row(&[
            Field::Int(k as i64),
            Field::Float(e),
            Field::Int(initial[k] as i64),
            Field::Int(last[k] as i64),
            Field::Float(pi[k]),
            Field::Float(pf[k]),
            Field::Float(exact.map_or(f64::NAN, |x| x[k])),
        ]);
    }
    t
}

fn max_curve_z(empirical: &CharacteristicCurve, analytic: &CharacteristicCurve) -> f64 {
    empirical
        .points
        .iter()
        .zip(&analytic.points)
        .map(|(e, a)| {
            let gap = (e.g - a.g).norm();
            if e.stderr > 0.0 { gap / e.stderr } else if gap < 1e-12 { 0.0 } else { f64::INFINITY }
        })
        .fold(0.0, f64::max)
}

/// The ITT prediction when L has a single invariant block, the block-wise one otherwise.
pub fn analytic_curve(setup: &Setup, taus: &[f64], us: &[C64]) -> CliResult<CharacteristicCurve> {
    let blocks = block_decompose(&setup.system, taus)?;
    Ok(if blocks.len() == 1 {
        analytic_curve_itt(setup.system.hamiltonian(), &setup.rho0, us)?
    } else {
        partial_g(&blocks, &setup.system, &setup.rho0, us)?
    })
}

pub fn simulate(p: &Params) -> CliResult<PathBuf> {
    if p.preset == Some(Preset::Fig4) {
        return crate::analyze::analyze(Some(Analysis::Collapse), p);
    }
    if let Some(bad) = p.analysis.iter().find(|a| !a.is_ensemble_output()) {
        return Err(config_err(format!("analysis '{}' belongs to `analyze`", bad.name())));
    }
    let wants = |a: Analysis| p.analysis.is_empty() || p.analysis.contains(&a);
    let setup = build_system(p)?;
    let config = protocol_config(p)?;
    let fixed_tau = config.waiting.fixed_tau(config.measurements);

    let ens = run_ensemble_with_workers(&setup.system, &setup.rho0, &config, p.workers)?;
    let exact = match fixed_tau {
        Some(tau) => Some(exact_distribution_fast(&setup.system, &setup.rho0, config.measurements, tau)?.final_energy()),
        None => None,
    };

    let mut out = OutputDir::create(&crate::output_root(p, "simulate"))?;
    out.write_csv("ensemble.csv", &io::ensemble_csv(&ens))?;
    out.write_csv("energies.csv", &energies_table(&ens, exact.as_deref()))?;
    out.write(
        "energies.gp",
        &format!(
            "set datafile separator ','\nset terminal pngcairo size 900,600\nset output 'energies.png'\nset title 'energy statistics, {}'\nset xlabel 'E'\nset ylabel 'probability'\nset style fill transparent solid 0.5\nplot 'energies.csv' every ::1 using 2:5 with impulses lw 6 title 'initial', \\\n     'energies.csv' every ::1 using 2:6 with impulses lw 3 title 'final', \\\n     'energies.csv' every ::1 using 2:7 with points pt 7 title 'exact'\n",
            setup.label
        ),
    )?;

    let counts = ens.pair_counts().final_counts();
    let n = setup.system.dim();
    let uniform = vec![1.0 / n as f64; n];
    let gof_uniform = chi_square_gof(&counts, &uniform)?;
    let mut results = json!({
        "system": setup.label,
        "system_fingerprint": ens.system_fingerprint,
        "config_fingerprint": ens.config_fingerprint,
        "realizations": ens.len(),
        "measurements": config.measurements,
        "final_energy_vs_uniform": {
            "chi2": gof_uniform,
            "total_variation": total_variation(&frequencies(&counts), &uniform)?,
        },
    });
    if let Some(exact) = &exact {
        results["final_energy_vs_exact"] = json!({
            "chi2": chi_square_gof(&counts, exact)?,
            "total_variation": total_variation(&frequencies(&counts), exact)?,
        });
    }

    if wants(Analysis::Histogram) {
        out.write_csv("histogram.csv", &io::histogram_csv(&ens.histogram()))?;
        out.write("histogram.gp", &gnuplot::histogram("histogram.csv", "histogram.png", &format!("heat, {}", setup.label)))?;
    }
    if wants(Analysis::GCurve) {
        let us = epsilon_grid();
        let empirical = empirical_g(&ens, &us)?;
        let probe: Vec<f64> = fixed_tau.into_iter().collect();
        let analytic = analytic_curve(&setup, &probe, &us)?;
        out.write_csv("curve_empirical.csv", &io::curve_csv(&empirical))?;
        out.write_csv("curve_analytic.csv", &io::curve_csv(&analytic))?;
        out.write(
            "characteristic.gp",
            &gnuplot::characteristic("curve_empirical.csv", "curve_analytic.csv", "characteristic.png", &setup.label),
        )?;
        results["g_curve_max_z"] = json!(max_curve_z(&empirical, &analytic));
    }
    if let Some((spin, omega)) = setup.spin {
        let pmf = spin_heat_pmf(spin, omega, p.beta.unwrap_or(0.0))?;
        out.write_csv("pmf.csv", &io::pmf_csv(&pmf, omega))?;
        out.write("pmf.gp", &gnuplot::pmf("pmf.csv", "pmf.png", &format!("heat PMF, {}", setup.label)))?;
        let hist = ens.histogram();
        let tol = 1e-9 * omega.abs();
        let counts: Vec<u64> = pmf
            .support()
            .iter()
            .map(|&q| hist.iter().filter(|b| (b.q - q).abs() <= tol).map(|b| b.count).sum())
            .collect();
        let z = binomial_z_scores(&counts, pmf.probabilities())?;
        results["pmf_max_abs_z"] = json!(z.iter().map(|v| v.abs()).fold(0.0, f64::max));
        results["pmf_total"] = json!(pmf.probabilities().iter().sum::<f64>());
    }

    let inputs = serde_json::to_value(p).unwrap_or(Value::Null);
    out.finish("simulate", inputs, results)
}
