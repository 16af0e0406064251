use std::path::PathBuf;

use serde_json::{json, Map, Value};

use qmonitor::asymptotics::{
    a_spectral_check, delta_from_generator, eigenvector_heatmap, euclidean_compare, itt_convergence, limit_order_study, operator_a,
    scaling_collapse, zeno_analysis, QuasiMember,
};
use qmonitor::heat_stats::partial_itt_predict;
use qmonitor::hilbert::{oscillator_system, spin_matrices, thermal_state, transverse_spin_system, Spin};
use qmonitor::io::{self, gnuplot, CsvTable, Field};
use qmonitor::linalg::max_abs;
use qmonitor::protocol::WaitingTime;
use qmonitor::transition::transition_matrix;

use crate::config::{Analysis, Params};
use crate::error::{config_err, CliResult};
use crate::output::OutputDir;
use crate::simulate::build_system;

fn spins(list: &[f64]) -> CliResult<Vec<Spin>> {
    Ok(list.iter().map(|&s| Spin::new(s)).collect::<qmonitor::Result<_>>()?)
}

fn with_default_n(p: &Params, n: usize) -> Params {
    Params { n: p.n.or(Some(n)), ..p.clone() }
}

fn spectrum(p: &Params, out: &mut OutputDir) -> CliResult<Value> {
    let taus = p.taus.clone().or(p.tau.map(|t| vec![t])).unwrap_or_else(|| vec![1.0]);
    // a spin given alone selects the scaled family H = −S_z/s
    let (system, s_or_n, label) = match (p.single_spin()?, &p.system) {
        (Some(s), None) => {
            let spin = Spin::new(s)?;
            (transverse_spin_system(spin, 1.0, true)?, s, format!("s={spin}"))
        }
        _ => {
            let setup = build_system(&with_default_n(p, 5))?;
            let n = setup.system.dim() as f64;
            (setup.system, n, setup.label)
        }
    };
    let mut table = CsvTable::new(&["k", "lambda_k", "tau", "s_or_N"]);
    let mut summary = Vec::new();
    for &tau in &taus {
        let l = transition_matrix(&system, tau)?;
        for (k, &lambda) in l.spectrum().iter().enumerate() {
            table.row(&[Field::Int(k as i64), Field::Float(lambda), Field::Float(tau), Field::Float(s_or_n)]);
        }
        summary.push(json!({ "tau": tau, "subleading_modulus": l.subleading_modulus() }));
    }
    out.write_csv("spectrum.csv", &table)?;
    Ok(json!({ "system": label, "taus": summary }))
}

fn collapse(p: &Params, out: &mut OutputDir) -> CliResult<Value> {
    let spin = Spin::new(p.single_spin()?.unwrap_or(300.0))?;
    let taus = p.taus.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0]);
    let data = scaling_collapse(spin, &taus)?;
    out.write_csv("scaling.csv", &io::scaling_csv(&data))?;
    out.write_csv("dispersion.csv", &io::dispersion_csv(&data))?;
    out.write("scaling.gp", &gnuplot::scaling("scaling.csv", &taus, "scaling.png", &format!("spectral collapse, s={spin}")))?;
    let heat_tau = p.tau.unwrap_or(taus[0]);
    out.write_csv("heatmap.csv", &io::heatmap_csv(&eigenvector_heatmap(spin, heat_tau)?))?;
    out.write("heatmap.gp", &gnuplot::heatmap("heatmap.csv", "heatmap.png", &format!("eigenvectors, s={spin}, tau={heat_tau}")))?;
    Ok(json!({
        "s": spin.value(),
        "taus": taus,
        "critical_x": data.critical_x,
        "critical_x_band": data.critical_x_band,
        "critical_lambda": data.critical_lambda,
        "quadratic_coefficient": data.quadratic_coefficient,
        "max_dispersion_below_0.9": data.max_dispersion_below(0.9),
        "heatmap_tau": heat_tau,
    }))
}

fn convergence(p: &Params, out: &mut OutputDir) -> CliResult<Value> {
    let setup = build_system(&with_default_n(p, 5))?;
    let waiting = p.waiting.unwrap_or(WaitingTime::Fixed { tau: p.tau.unwrap_or(1.0) });
    let ms = p.ms.clone().unwrap_or_else(|| vec![1, 2, 5, 10, 20, 50, 100]);
    let report = itt_convergence(&setup.system, &waiting, &ms)?;
    out.write_csv("convergence.csv", &io::convergence_csv(&report))?;
    out.write("convergence.gp", &gnuplot::convergence("convergence.csv", "convergence.png", "approach to the fixed point", false))?;
    Ok(json!({ "system": setup.label, "waiting": waiting, "report": report }))
}

fn zeno(p: &Params, out: &mut OutputDir) -> CliResult<Value> {
    let setup = build_system(&with_default_n(p, 4))?;
    let total_time = p.total_time.unwrap_or(1.0);
    let ms = p.ms.clone().unwrap_or_else(|| vec![100, 200, 500, 1000, 2000, 5000, 10000]);
    let report = zeno_analysis(&setup.system, total_time, &ms)?;
    out.write_csv("zeno.csv", &io::zeno_csv(&report))?;
    out.write("zeno.gp", &gnuplot::convergence("zeno.csv", "zeno.png", "distance from identity at fixed total time", true))?;
    Ok(json!({ "system": setup.label, "report": report }))
}

fn quasi(p: &Params, out: &mut OutputDir) -> CliResult<Value> {
    let spin = Spin::new(p.single_spin()?.unwrap_or(2.0))?;
    let omega = p.omega.unwrap_or(1.0);
    let tau = p.tau.unwrap_or(1.0);
    let t_eff = p.t_eff.unwrap_or(1.0);
    let xis = p.xis.clone().unwrap_or_else(|| vec![0.04, 0.02, 0.01]);
    let members: Vec<QuasiMember> =
        xis.iter().map(|&xi| QuasiMember::tilted_spin(spin, omega, tau, xi)).collect::<qmonitor::Result<_>>()?;
    let points = euclidean_compare(&members, t_eff)?;
    let mut table = CsvTable::new(&["xi", "M", "residual", "error"]);
    for pt in &points {
        table.row(&[Field::Float(pt.xi), Field::Int(pt.measurements as i64), Field::Float(pt.residual), Field::Float(pt.error)]);
    }
    out.write_csv("quasi.csv", &table)?;

    // Δ from the closed-form generator R = S_y against 𝒜 sin²(ωτ/2), both in the m ordering
    let energies: Vec<f64> = spin.m_values().iter().map(|&m| -omega * m).collect();
    let from_generator = delta_from_generator(&spin_matrices(spin).y, &energies, tau);
    let closed = operator_a(spin) * (omega * tau / 2.0).sin().powi(2);
    let closed_form_gap = max_abs(&(from_generator - closed));
    // ξ²Δ extracted from each overlap matrix against the closed form
    let mut extracted_gap = Vec::new();
    for m in &members {
        let generic = QuasiMember::generic(m.system.clone(), tau)?;
        extracted_gap.push(max_abs(&(&generic.delta * generic.xi.powi(2) - &m.delta * m.xi.powi(2))));
    }

    let legendre_s = p.legendre_s.clone().unwrap_or_else(|| vec![50.0, 100.0, 200.0]);
    let mut legendre = CsvTable::new(&["s", "k", "eigenvalue", "eigenvalue_error", "overlap", "parity_defect"]);
    for spin in spins(&legendre_s)? {
        for row in a_spectral_check(spin, None)?.rows {
            legendre.row(&[
                Field::Float(spin.value()),
                Field::Int(row.k as i64),
                Field::Float(row.eigenvalue),
                Field::Float(row.eigenvalue_error),
                Field::Float(row.overlap),
                Field::Float(row.parity_defect),
            ]);
        }
    }
    out.write_csv("legendre.csv", &legendre)?;
    Ok(json!({ "s": spin.value(), "omega": omega, "tau": tau, "t_eff": t_eff, "points": points,
        "delta_closed_form_gap": closed_form_gap, "extracted_xi2_delta_gap": extracted_gap }))
}

fn limits(p: &Params, out: &mut OutputDir) -> CliResult<Value> {
    let spin_list = spins(p.s.as_deref().unwrap_or(&[20.0, 80.0, 320.0]))?;
    let ms: Vec<u64> = p.ms.clone().map(|v| v.into_iter().map(|m| m as u64).collect()).unwrap_or_else(|| vec![10, 100, 1000, 10000]);
    let tau = p.tau.unwrap_or(0.2);
    let t_eff = p.t_eff.unwrap_or(0.5);
    let table = limit_order_study(&spin_list, &ms, tau, Some(t_eff))?;
    let mut grid = CsvTable::new(&["s", "M", "to_uniform", "to_identity"]);
    for c in &table.cells {
        grid.row(&[Field::Float(c.s), Field::Int(c.measurements as i64), Field::Float(c.to_uniform), Field::Float(c.to_identity)]);
    }
    out.write_csv("limits.csv", &grid)?;
    let mut eu = CsvTable::new(&["s", "M", "t_eff", "error"]);
    for c in &table.euclidean {
        eu.row(&[Field::Float(c.s), Field::Int(c.measurements as i64), Field::Float(c.t_eff), Field::Float(c.error)]);
    }
    out.write_csv("euclidean.csv", &eu)?;
    Ok(json!({ "tau": tau, "t_eff": t_eff }))
}

fn oscillator(p: &Params, out: &mut OutputDir) -> CliResult<Value> {
    let nmax = p.nmax.unwrap_or(3);
    let osc = oscillator_system(nmax, p.omega.unwrap_or(1.0), p.omega2.unwrap_or(2.5))?;
    let tau = p.tau.unwrap_or(1.0);
    let m = p.measurements.unwrap_or(30) as u64;
    let l = transition_matrix(&osc.system, tau)?;
    let lm = l.power(m);
    let mut table = CsvTable::new(&["n", "dim", "leakage", "uniform_distance"]);
    for sector in osc.sector_decompose() {
        let d = sector.indices.len();
        let inside = |k: usize| sector.indices.contains(&k);
        let mut leakage = 0.0_f64;
        let mut uniform = 0.0_f64;
        for i in 0..osc.system.dim() {
            for j in 0..osc.system.dim() {
                match (inside(i), inside(j)) {
                    (true, true) => uniform = uniform.max((lm[(i, j)] - 1.0 / d as f64).abs()),
                    (true, false) | (false, true) => leakage = leakage.max(lm[(i, j)].abs()),
                    _ => {}
                }
            }
        }
        table.row(&[Field::Int(sector.n as i64), Field::Int(d as i64), Field::Float(leakage), Field::Float(uniform)]);
    }
    out.write_csv("sectors.csv", &table)?;
    let rho0 = thermal_state(osc.system.hamiltonian(), p.beta.unwrap_or(0.5))?;
    let prediction = partial_itt_predict(&osc.blocks, &osc.system, &rho0)?;
    Ok(json!({
        "nmax": nmax,
        "tau": tau,
        "M": m,
        "off_block_max": osc.blocks.off_block_max(&lm),
        "pi_tilde": prediction.pi_tilde,
        "p_m": prediction.p_m,
    }))
}

pub fn analyze(kind: Option<Analysis>, p: &Params) -> CliResult<PathBuf> {
    let kinds: Vec<Analysis> = match kind {
        Some(k) => vec![k],
        None => p.analysis.clone(),
    };
    if kinds.is_empty() {
        return Err(config_err("no analysis requested"));
    }
    if let Some(bad) = kinds.iter().find(|a| a.is_ensemble_output()) {
        return Err(config_err(format!("'{}' is produced by `simulate`", bad.name())));
    }
    let fallback = if kinds.len() == 1 { kinds[0].name() } else { "analysis" };
    let mut out = OutputDir::create(&crate::output_root(p, fallback))?;
    let mut results = Map::new();
    for k in &kinds {
        let r = match k {
            Analysis::Spectrum => spectrum(p, &mut out)?,
            Analysis::Collapse => collapse(p, &mut out)?,
            Analysis::Convergence => convergence(p, &mut out)?,
            Analysis::Zeno => zeno(p, &mut out)?,
            Analysis::Quasi => quasi(p, &mut out)?,
            Analysis::Limits => limits(p, &mut out)?,
            Analysis::Oscillator => oscillator(p, &mut out)?,
            Analysis::Histogram | Analysis::GCurve => unreachable!("rejected above"),
        };
        results.insert(k.name().to_string(), r);
    }
    let inputs = serde_json::to_value(p).unwrap_or(Value::Null);
    out.finish("analyze", inputs, Value::Object(results))
}
