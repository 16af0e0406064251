//! End-to-end acceptance criteria. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; the process fails if any criterion does.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qmonitor::asymptotics::{
    a_spectral_check, delta_from_generator, euclidean_compare, limit_order_study, operator_a, scaling_collapse,
    zeno_analysis, QuasiMember,
};
use qmonitor::heat_stats::{analytic_curve_itt, empirical_g, partial_itt_predict, spin_heat_pmf};
use qmonitor::hilbert::{
    oscillator_system, random_block_system, random_system, spectral_decompose, spin_matrices, thermal_state,
    transverse_spin_system, DensityMatrix, QuantumSystem, Spin,
};
use qmonitor::linalg::{max_abs, CMatrix, C64};
use qmonitor::protocol::{
    exact_distribution, heat_levels, run_ensemble_with_workers, run_pair_counts, ProtocolConfig,
};
use qmonitor::stats::{binomial_z_scores, chi_square_gof, frequencies, total_variation};
use qmonitor::transition::{chain_product, transition_matrix, BlockStructure};

use qmonitor_cli::config::Params;
use qmonitor_cli::presets::{Preset, DEFAULT_SEED};
use qmonitor_cli::simulate::{build_system, epsilon_grid, protocol_config};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn preset_params(preset: Preset) -> Params {
    preset.params().overlay(Params { preset: Some(preset), ..Params::default() })
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn max_abs_z(counts: &[u64], probabilities: &[f64]) -> f64 {
    binomial_z_scores(counts, probabilities).unwrap().iter().map(|z| z.abs()).fold(0.0, f64::max)
}

fn itt_uniformity() -> Outcome {
    let p = preset_params(Preset::Fig1a);
    let setup = build_system(&p).unwrap();
    let config = protocol_config(&p).unwrap();
    let ens = run_ensemble_with_workers(&setup.system, &setup.rho0, &config, None).unwrap();
    let counts = ens.pair_counts().final_counts();
    let uniform = vec![1.0 / counts.len() as f64; counts.len()];
    let gof = chi_square_gof(&counts, &uniform).unwrap();
    let tv = total_variation(&frequencies(&counts), &uniform).unwrap();
    check(gof.p_value > 0.01 && tv < 0.01, format!("chi2 p = {:.3}, TV = {tv:.4}", gof.p_value))
}

fn characteristic_function() -> Outcome {
    let p = preset_params(Preset::Fig1b);
    let setup = build_system(&p).unwrap();
    let config = protocol_config(&p).unwrap();
    let ens = run_ensemble_with_workers(&setup.system, &setup.rho0, &config, None).unwrap();
    let us = epsilon_grid();
    let empirical = empirical_g(&ens, &us).unwrap();
    let analytic = analytic_curve_itt(setup.system.hamiltonian(), &setup.rho0, &us).unwrap();
    let mut worst: f64 = 0.0;
    for (e, a) in empirical.points.iter().zip(&analytic.points) {
        let gap = (e.g - a.g).norm();
        let z = if e.stderr > 0.0 { gap / e.stderr } else if gap < 1e-12 { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
    }
    check(worst <= 4.0, format!("{} points, max |gap|/SE = {worst:.2}", us.len()))
}

fn jarzynski() -> Outcome {
    let mut within = 0;
    let mut total = 0;
    let mut worst: f64 = 0.0;
    for (i, n) in [2, 3, 4, 5, 6, 7, 8, 9, 10, 10].into_iter().enumerate() {
        let (system, _) = random_system(n, 300 + i as u64).unwrap();
        for beta in [0.2, 0.5, 1.0] {
            let rho0 = thermal_state(system.hamiltonian(), beta).unwrap();
            let config = ProtocolConfig::fixed(25, 1.0, 50_000, 7000 + total as u64);
            let ens = run_ensemble_with_workers(&system, &rho0, &config, None).unwrap();
            let g = empirical_g(&ens, &[C64::new(0.0, beta)]).unwrap().points[0];
            let z = (g.g - C64::new(1.0, 0.0)).norm() / g.stderr;
            worst = worst.max(z);
            within += usize::from(z <= 4.0);
            total += 1;
        }
    }
    check(within >= 28, format!("{within}/{total} within 4 SE, max z = {worst:.2}"))
}

fn spin_pmf() -> Outcome {
    let spin = Spin::new(3.5).unwrap();
    let system = transverse_spin_system(spin, 1.0, false).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for (i, beta) in [0.0, 0.5, 1.0].into_iter().enumerate() {
        let rho0 = thermal_state(system.hamiltonian(), beta).unwrap();
        let config = ProtocolConfig::fixed(25, 1.0, 100_000, DEFAULT_SEED + i as u64);
        let ens = run_ensemble_with_workers(&system, &rho0, &config, None).unwrap();
        let pmf = spin_heat_pmf(spin, 1.0, beta).unwrap();
        worst_sum = worst_sum.max((pmf.probabilities().iter().sum::<f64>() - 1.0).abs());
        let hist = ens.histogram();
        let counts: Vec<u64> = pmf
            .support()
            .iter()
            .map(|&q| hist.iter().filter(|b| (b.q - q).abs() <= 1e-9).map(|b| b.count).sum())
            .collect();
        // every sampled heat value must belong to the predicted support
        let covered: u64 = counts.iter().sum();
        if covered != ens.len() as u64 {
            return Err(format!("beta = {beta}: {} samples outside the PMF support", ens.len() as u64 - covered));
        }
        worst = worst.max(max_abs_z(&counts, pmf.probabilities()));
    }
    check(worst <= 4.0 && worst_sum <= 1e-12, format!("max bin |z| = {worst:.2}, |sum - 1| = {worst_sum:.1e}"))
}

/// Qubit with observable σ_z and H = (ΔE/2)(cos φ σ_z + sin φ σ_x).
fn qubit(phi: f64, gap: f64) -> QuantumSystem {
    let (c, s) = (phi.cos() * gap / 2.0, phi.sin() * gap / 2.0);
    let re = |x: f64| C64::new(x, 0.0);
    let h = CMatrix::from_row_slice(2, 2, &[re(c), re(s), re(s), re(-c)]);
    let o = CMatrix::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(-1.0)]);
    QuantumSystem::new(spectral_decompose(&h).unwrap(), spectral_decompose(&o).unwrap()).unwrap()
}

fn two_level_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let phi = rng.random_range(0.0..std::f64::consts::PI);
        let gap = rng.random_range(0.1..5.0);
        let tau = rng.random_range(0.01..10.0);
        let l = transition_matrix(&qubit(phi, gap), tau).unwrap();
        let lambda_min = l.spectrum().iter().copied().fold(f64::INFINITY, f64::min);
        let formula = 1.0 - 2.0 * phi.sin().powi(2) * (gap * tau / 2.0).sin().powi(2);
        worst = worst.max((lambda_min - formula).abs());
    }
    check(worst < 1e-10, format!("100 triples, max error = {worst:.1e}"))
}

/// Largest |z| of Monte Carlo π̃ and p_m against the block prediction, and the exact leakage.
fn partial_case(system: &QuantumSystem, rho0: &DensityMatrix, blocks: &BlockStructure, seed: u64) -> (f64, f64) {
    let measurements = 30;
    let l = transition_matrix(system, 1.0).unwrap();
    let chain = chain_product(&vec![l; measurements]).unwrap();
    let leakage = blocks.off_block_max(&chain.matrix);
    let prediction = partial_itt_predict(blocks, system, rho0).unwrap();
    let config = ProtocolConfig::fixed(measurements, 1.0, 100_000, seed);
    let ens = run_ensemble_with_workers(system, rho0, &config, None).unwrap();
    let mut outcomes = vec![0u64; system.dim()];
    for r in &ens.records {
        outcomes[r.final_outcome] += 1;
    }
    let z = max_abs_z(&outcomes, &prediction.pi_tilde).max(max_abs_z(&ens.pair_counts().final_counts(), &prediction.p_m));
    (z, leakage)
}

fn partial_itt() -> Outcome {
    let osc = oscillator_system(3, 1.0, 2.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rho0 = qmonitor::hilbert::random_density_matrix(osc.system.dim(), &mut rng);
    let (mut worst_z, mut worst_leak) = partial_case(&osc.system, &rho0, &osc.blocks, 600);

    // Random block systems whose sub-leading |λ| ≤ 0.75, so that M = 30 is deep in the asymptotic regime.
    let mut accepted = 0;
    let mut seed = 0;
    while accepted < 20 {
        seed += 1;
        let dims: Vec<usize> = (0..rng.random_range(2..=3)).map(|_| rng.random_range(1..=4)).collect();
        let (system, rho0) = random_block_system(&dims, seed).unwrap();
        let l = transition_matrix(&system, 1.0).unwrap();
        if l.subleading_modulus() > 0.75 {
            continue;
        }
        let mut start = 0;
        let partition: Vec<Vec<usize>> = dims
            .iter()
            .map(|&d| {
                start += d;
                (start - d..start).collect()
            })
            .collect();
        let blocks = BlockStructure::from_partition(&system, partition).unwrap();
        let (z, leak) = partial_case(&system, &rho0, &blocks, 600 + seed);
        worst_z = worst_z.max(z);
        worst_leak = worst_leak.max(leak);
        accepted += 1;
    }
    check(
        worst_z <= 4.0 && worst_leak < 1e-12,
        format!("oscillator + {accepted} block systems, max |z| = {worst_z:.2}, leakage = {worst_leak:.1e}"),
    )
}

fn zeno_scaling() -> Outcome {
    let (system, _) = random_system(4, 1).unwrap();
    let ms = [100, 200, 500, 1000, 2000, 5000, 10000];
    let report = zeno_analysis(&system, 1.0, &ms).unwrap();
    let slope = report.slope.unwrap_or(f64::NAN);
    check((-1.3..=-0.8).contains(&slope), format!("slope = {slope:.4}"))
}

fn euclidean_limit() -> Outcome {
    let spin = Spin::new(2.0).unwrap();
    let (omega, tau) = (1.0, 1.0);
    let members: Vec<QuasiMember> =
        [0.04, 0.02, 0.01].iter().map(|&xi| QuasiMember::tilted_spin(spin, omega, tau, xi).unwrap()).collect();
    let errors: Vec<f64> = euclidean_compare(&members, 1.0).unwrap().iter().map(|p| p.error).collect();
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let energies: Vec<f64> = spin.m_values().iter().map(|&m| -omega * m).collect();
    let delta = delta_from_generator(&spin_matrices(spin).y, &energies, tau);
    let gap = max_abs(&(delta - operator_a(spin) * (omega * tau / 2.0).sin().powi(2)));
    check(decreasing && gap <= 1e-10, format!("errors = {}, closed-form gap = {gap:.1e}", sci(&errors)))
}

fn legendre_spectrum() -> Outcome {
    let report = |s: f64| a_spectral_check(Spin::new(s).unwrap(), Some(5)).unwrap();
    let (r50, r100, r200) = (report(50.0), report(100.0), report(200.0));
    let eig = r100.rows.iter().map(|r| r.eigenvalue_error.abs()).fold(0.0, f64::max);
    let overlap = r100.rows.iter().map(|r| r.overlap).fold(1.0, f64::min);
    // k = 0 and 1 are exact at every s, so their deficits sit at rounding level
    let monotone = (0..=5).all(|k| {
        let d = [&r50, &r100, &r200].map(|r| 1.0 - r.rows[k].overlap);
        if d[0] <= 1e-12 { d[1] <= 1e-12 && d[2] <= 1e-12 } else { d[1] < d[0] && d[2] < d[1] }
    });
    check(
        eig <= 0.5 && overlap >= 0.99 && monotone,
        format!("s=100: max |a_k - k(k+1)| = {eig:.3}, min overlap = {overlap:.5}; monotone in s: {monotone}"),
    )
}

fn scaling() -> Outcome {
    let data = scaling_collapse(Spin::new(300.0).unwrap(), &[0.5, 1.0, 2.0, 4.0]).unwrap();
    let dispersion = data.max_dispersion_below(0.9);
    let xc = data.critical_x.unwrap_or(f64::NAN);
    let lc = data.critical_lambda.unwrap_or(f64::NAN);
    let c = data.quadratic_coefficient;
    check(
        dispersion < 0.01 && (0.90..=0.97).contains(&xc) && (0.25..=0.35).contains(&lc) && (c - 1.0).abs() <= 0.05,
        format!("dispersion(x<0.9) = {dispersion:.4}, critical_x = {xc:.4}, lambda = {lc:.3}, coefficient = {c:.4}"),
    )
}

fn limit_order() -> Outcome {
    let spins: Vec<Spin> = [20.0, 80.0, 320.0].iter().map(|&s| Spin::new(s).unwrap()).collect();
    let table = limit_order_study(&spins, &[10, 100, 1000, 10000], 0.2, Some(0.5)).unwrap();
    let uniform: Vec<f64> = table.uniform_trend(20.0).into_iter().skip(1).collect();
    let identity = table.identity_trend(10);
    let euclid = table.euclidean_trend();
    let strictly = |v: &[f64]| v.len() == 3 && v.windows(2).all(|w| w[1] < w[0]);
    check(
        strictly(&uniform) && strictly(&identity) && strictly(&euclid),
        format!("uniform {}, identity {}, euclidean {}", sci(&uniform), sci(&identity), sci(&euclid)),
    )
}

fn oracle_equivalence() -> Outcome {
    let (system, rho0) = random_system(4, 1).unwrap();
    let exact = exact_distribution(&system, &rho0, 4, 1.0).unwrap();
    let total: f64 = exact.joint.iter().sum();
    let config = ProtocolConfig::fixed(4, 1.0, 1_000_000, 12);
    let counts = run_pair_counts(&system, &rho0, &config, None).unwrap();
    let bins = counts.heat_histogram(&heat_levels(system.energies()));
    let probs: Vec<f64> = bins.iter().map(|b| exact.heat.probability_near(b.q, 1e-9)).collect();
    let observed: Vec<u64> = bins.iter().map(|b| b.count).collect();
    let z = max_abs_z(&observed, &probs);
    check(z <= 4.0 && (total - 1.0).abs() <= 1e-12, format!("{} bins, max |z| = {z:.2}, |sum - 1| = {:.1e}", bins.len(), (total - 1.0).abs()))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut compared = 0;
    for preset in ["fig1a", "fig1b", "spin72"] {
        let mut runs = Vec::new();
        for workers in [1, 4] {
            let out = tmp.path().join(format!("{preset}-{workers}"));
            let status = Command::new(env!("CARGO_BIN_EXE_qmonitor"))
                .args(["simulate", "--preset", preset, "--realizations", "20000", "--workers", &workers.to_string()])
                .arg("--output")
                .arg(&out)
                .output()
                .unwrap();
            if !status.status.success() {
                return Err(format!("{preset} with {workers} workers failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
            runs.push(csv_files(&out));
        }
        if runs[0].is_empty() || runs[0] != runs[1] {
            return Err(format!("{preset}: CSV outputs differ between 1 and 4 workers"));
        }
        compared += runs[0].len();
    }
    Ok(format!("{compared} CSV files byte-identical across worker counts"))
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("ITT uniformity", itt_uniformity),
        ("characteristic function", characteristic_function),
        ("Jarzynski equality", jarzynski),
        ("spin heat PMF", spin_pmf),
        ("two-level spectral formula", two_level_formula),
        ("partial ITT", partial_itt),
        ("Zeno scaling", zeno_scaling),
        ("Euclidean limit", euclidean_limit),
        ("Legendre spectrum", legendre_spectrum),
        ("scaling collapse", scaling),
        ("order of limits", limit_order),
        ("oracle equivalence", oracle_equivalence),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
