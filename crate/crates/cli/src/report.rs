//! Machine-readable records and plot data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::io::write_atomic;
use crate::CliError;

/// Summary of one simulation at one exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub p: f64,
    pub energy: f64,
    /// `(2 − p)` times the energy.
    pub rescaled_total: f64,
    pub iterations: usize,
    pub status: String,
    pub gradient_ratio: f64,
    pub stress_residual: f64,
    pub suspect_nodes: usize,
    /// Suspect nodes deeper than the η-ball radius.
    pub interior_suspect_nodes: usize,
    pub segments: Vec<[[f64; 3]; 2]>,
    pub fit_residuals: Vec<f64>,
    /// Line density of each extracted segment.
    pub densities: Vec<f64>,
    /// `(r, r^(p−3) E(B_r))` about the centre.
    pub monotonicity: Vec<[f64; 2]>,
    /// `(arclength, line density)` along the first segment.
    pub density_along: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityGap {
    pub edge: usize,
    pub density: f64,
    pub class: Option<usize>,
    pub table_value: Option<f64>,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub solver_mass: f64,
    pub solver_chain: serde_json::Value,
    pub extracted_chain: Option<serde_json::Value>,
    pub tube_mass: f64,
    /// `None` when nothing was extracted.
    pub hausdorff: Option<f64>,
    pub h: f64,
    pub densities: Vec<DensityGap>,
    pub sweep: Vec<[f64; 2]>,
    /// Least-squares line in `(2 − p)` evaluated at `p = 2`.
    pub extrapolated_mass: f64,
    pub relative_error: f64,
}

/// Intercept at `p = 2` of the least-squares line through
/// `((2 − p), rescaled_total)`.
pub fn extrapolate(records: &[SweepRecord]) -> Result<f64, CliError> {
    let mut ps: Vec<f64> = records.iter().map(|r| r.p).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    if ps.len() < 3 {
        return Err(CliError::TooFewExponents(ps.len()));
    }
    let n = records.len() as f64;
    let xs: Vec<f64> = records.iter().map(|r| 2.0 - r.p).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.rescaled_total).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(my - sxy / sxx * mx)
}

/// `mass_vs_p.csv`, `monotonicity.csv` and `density_along.csv` in `dir`.
pub fn emit_plot_data(dir: &Path, records: &[SweepRecord]) -> Result<Vec<PathBuf>, CliError> {
    if records.is_empty() {
        return Err(CliError::EmptyRecords);
    }
    let mut mass = String::from("two_minus_p,p,rescaled_total\n");
    let mut mono = String::from("p,r,value\n");
    let mut along = String::from("p,s,density\n");
    for r in records {
        writeln!(mass, "{:?},{:?},{:?}", 2.0 - r.p, r.p, r.rescaled_total).unwrap();
        for [x, y] in &r.monotonicity {
            writeln!(mono, "{:?},{x:?},{y:?}", r.p).unwrap();
        }
        for [x, y] in &r.density_along {
            writeln!(along, "{:?},{x:?},{y:?}", r.p).unwrap();
        }
    }
    Ok(vec![
        write_atomic(dir, "mass_vs_p.csv", mass.as_bytes())?,
        write_atomic(dir, "monotonicity.csv", mono.as_bytes())?,
        write_atomic(dir, "density_along.csv", along.as_bytes())?,
    ])
}
