//! JSON system documents, CSV tables and gnuplot scripts.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{ConvergenceReport, HeatmapCell, ScalingDataset, ZenoReport};
use crate::error::{Error, Result};
use crate::heat_stats::{CharacteristicCurve, HeatPmf};
use crate::hilbert::{spectral_decompose, DensityMatrix, QuantumSystem};
use crate::linalg::{CMatrix, C64};
use crate::protocol::{HeatBin, HeatEnsemble};

/// {dim, H, O, rho0, metadata} with matrices as row-major [re, im] pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDocument {
    pub dim: usize,
    #[serde(rename = "H")]
    pub h: Vec<[f64; 2]>,
    #[serde(rename = "O")]
    pub o: Vec<[f64; 2]>,
    pub rho0: Vec<[f64; 2]>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

fn flatten(m: &CMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

fn unflatten(dim: usize, entries: &[[f64; 2]], name: &str) -> Result<CMatrix> {
    if entries.len() != dim * dim {
        return Err(Error::InvalidConfig(format!("{name} has {} entries, expected {}", entries.len(), dim * dim)));
    }
    if entries.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name} has non-finite entries")));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        let [re, im] = entries[i * dim + j];
        C64::new(re, im)
    }))
}

impl SystemDocument {
    pub fn new(sys: &QuantumSystem, rho0: &DensityMatrix) -> Self {
        SystemDocument {
            dim: sys.dim(),
            h: flatten(sys.hamiltonian().matrix()),
            o: flatten(sys.observable().matrix()),
            rho0: flatten(rho0.matrix()),
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn to_system(&self) -> Result<(QuantumSystem, DensityMatrix)> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        let h = spectral_decompose(&unflatten(self.dim, &self.h, "H")?)?;
        let o = spectral_decompose(&unflatten(self.dim, &self.o, "O")?)?;
        let rho0 = DensityMatrix::new(unflatten(self.dim, &self.rho0, "rho0")?)?;
        Ok((QuantumSystem::new(h, o)?, rho0))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("system document: {e}")))
    }
}

/// Shortest decimal that parses back to the same f64.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        ryu::Buffer::new().format_finite(x).to_string()
    }
}

/// Comma-separated table with a header row and LF line endings.
pub struct CsvTable {
    text: String,
    columns: usize,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { text: format!("{}\n", header.join(",")), columns: header.len() }
    }

    pub fn row(&mut self, fields: &[Field]) {
        debug_assert_eq!(fields.len(), self.columns);
        let cells: Vec<String> = fields.iter().map(Field::render).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(self.text.as_bytes())
    }
}

pub enum Field {
    Int(i64),
    Float(f64),
}

impl Field {
    fn render(&self) -> String {
        match *self {
            Field::Int(i) => i.to_string(),
            Field::Float(x) => format_float(x),
        }
    }
}

use Field::{Float, Int};

pub fn ensemble_csv(ens: &HeatEnsemble) -> CsvTable {
    let mut t = CsvTable::new(&["n", "E_n", "m", "E_m", "Q"]);
    for r in &ens.records {
        t.row(&[Int(r.n as i64), Float(ens.energies[r.n]), Int(r.m as i64), Float(ens.energies[r.m]), Float(r.q)]);
    }
    t
}

pub fn histogram_csv(bins: &[HeatBin]) -> CsvTable {
    let mut t = CsvTable::new(&["Q", "count", "probability"]);
    for b in bins {
        t.row(&[Float(b.q), Int(b.count as i64), Float(b.probability)]);
    }
    t
}

pub fn curve_csv(curve: &CharacteristicCurve) -> CsvTable {
    let mut t = CsvTable::new(&["re_u", "im_u", "re_G", "im_G", "stderr"]);
    for p in &curve.points {
        t.row(&[Float(p.u.re), Float(p.u.im), Float(p.g.re), Float(p.g.im), Float(p.stderr)]);
    }
    t
}

/// Rows (l, Q, probability); `unit` is the heat quantum so that l = Q/unit.
pub fn pmf_csv(pmf: &HeatPmf, unit: f64) -> CsvTable {
    let mut t = CsvTable::new(&["l", "Q", "probability"]);
    for (&q, &p) in pmf.support().iter().zip(pmf.probabilities()) {
        t.row(&[Int((q / unit).round() as i64), Float(q), Float(p)]);
    }
    t
}

pub fn spectrum_csv(spectrum: &[f64], tau: f64, s_or_n: f64) -> CsvTable {
    let mut t = CsvTable::new(&["k", "lambda_k", "tau", "s_or_N"]);
    for (k, &l) in spectrum.iter().enumerate() {
        t.row(&[Int(k as i64), Float(l), Float(tau), Float(s_or_n)]);
    }
    t
}

pub fn scaling_csv(data: &ScalingDataset) -> CsvTable {
    let mut t = CsvTable::new(&["s", "tau", "k", "x", "lambda"]);
    for p in &data.points {
        t.row(&[Float(data.spin.value()), Float(p.tau), Int(p.k as i64), Float(p.x), Float(p.lambda)]);
    }
    t
}

pub fn dispersion_csv(data: &ScalingDataset) -> CsvTable {
    let mut t = CsvTable::new(&["x", "dispersion"]);
    for &(x, d) in &data.dispersion {
        t.row(&[Float(x), Float(d)]);
    }
    t
}

pub fn convergence_csv(report: &ConvergenceReport) -> CsvTable {
    distance_csv(&report.ms, &report.distances)
}

pub fn zeno_csv(report: &ZenoReport) -> CsvTable {
    distance_csv(&report.ms, &report.deviations)
}

fn distance_csv(ms: &[usize], distances: &[f64]) -> CsvTable {
    let mut t = CsvTable::new(&["M", "distance"]);
    for (&m, &d) in ms.iter().zip(distances) {
        t.row(&[Int(m as i64), Float(d)]);
    }
    t
}

pub fn heatmap_csv(cells: &[HeatmapCell]) -> CsvTable {
    let mut t = CsvTable::new(&["k", "m", "log10_abs_v"]);
    for c in cells {
        t.row(&[Int(c.k as i64), Float(c.m), Float(c.log10_abs)]);
    }
    t
}

/// gnuplot command files reading the CSVs above from the same directory.
pub mod gnuplot {
    fn preamble(output: &str, title: &str) -> String {
        format!(
            "set datafile separator ','\nset terminal pngcairo size 900,600\nset output '{output}'\nset title '{title}'\nset key outside\n"
        )
    }

    /// Initial and final energy histograms or heat histograms as impulses.
    pub fn histogram(csv: &str, output: &str, title: &str) -> String {
        preamble(output, title)
            + &format!("set xlabel 'Q'\nset ylabel 'probability'\nplot '{csv}' every ::1 using 1:3 with impulses lw 3 title 'empirical'\n")
    }

    /// Empirical curve with error bars against an analytic curve over real ε.
    pub fn characteristic(empirical: &str, analytic: &str, output: &str, title: &str) -> String {
        preamble(output, title)
            + &format!(
                "set xlabel 'epsilon'\nset ylabel 'G'\nplot '{empirical}' every ::1 using 2:3:5 with yerrorbars title 'empirical', \\\n     '{analytic}' every ::1 using 2:3 with lines title 'analytic'\n"
            )
    }

    pub fn pmf(csv: &str, output: &str, title: &str) -> String {
        preamble(output, title)
            + &format!("set xlabel 'Q'\nset ylabel 'p(Q)'\nset logscale y\nplot '{csv}' every ::1 using 2:3 with linespoints title 'p(Q)'\n")
    }

    /// λ against τk/2s, one curve per τ, with the small-x law 1 − x².
    pub fn scaling(csv: &str, taus: &[f64], output: &str, title: &str) -> String {
        let mut plots: Vec<String> = taus
            .iter()
            .map(|tau| format!("'{csv}' every ::1 using ($2=={tau} ? $4 : 1/0):5 with points pt 7 ps 0.4 title 'tau={tau}'"))
            .collect();
        plots.push("1 - x**2 with lines dt 2 title '1-x^2'".into());
        preamble(output, title)
            + &format!("set xlabel 'tau k / 2s'\nset ylabel 'lambda_k'\nset yrange [-1:1]\nplot {}\n", plots.join(", \\\n     "))
    }

    pub fn convergence(csv: &str, output: &str, title: &str, loglog: bool) -> String {
        let scale = if loglog { "set logscale xy\n" } else { "set logscale y\n" };
        preamble(output, title)
            + scale
            + &format!("set xlabel 'M'\nset ylabel 'distance'\nplot '{csv}' every ::1 using 1:2 with linespoints title 'distance'\n")
    }

    pub fn heatmap(csv: &str, output: &str, title: &str) -> String {
        preamble(output, title)
            + &format!(
                "set xlabel 'm'\nset ylabel 'k'\nset cblabel 'log10|v_k(m)|'\nset view map\nplot '{csv}' every ::1 using 2:1:3 with points pt 5 ps 0.5 palette notitle\n"
            )
    }
}
