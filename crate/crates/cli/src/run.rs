//! Orchestration of the subcommands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use plateau_core::formats::{
    chain_to_json, parse_chain_json, parse_group_table, parse_lengths, parse_spec_csv, solve_report_json, ChainJson,
};
use plateau_core::geometry::{hausdorff_segments, point_segment_distance};
use plateau_core::plateau::MatchingOptions;
use plateau_core::{
    solve_plateau, validate_chain, BoundaryChargeSpec, Chain, EnergyTable, FiniteGroup, LengthSpectrum,
    PlateauError, Point, ResolutionSearch, SolveOptions, VertexKind,
};
use plateau_sim::boundary::Datum;
use plateau_sim::energy::{energy_measure, eta_regularity_map, monotonicity_profile, stress_divergence_residual};
use plateau_sim::extract::{extract_singular_set, segment_density, ExtractError, ExtractOptions};
use plateau_sim::minimize::{minimize, perturb, MinimizeOptions, MinimizeOutcome};
use plateau_sim::{fractional_seminorm, seed, BoundaryField, EnergyMeasure, Grid, RealProjectivePlane};
use rayon::prelude::*;

use crate::config::{DatumKind, GroupSource, LengthSource, Mode, RunConfig};
use crate::io::{read_text, write_atomic};
use crate::report::{emit_plot_data, extrapolate, CompareReport, DensityGap, SweepRecord};
use crate::CliError;

/// Files written by a run, and the reason when the problem was infeasible
/// (exit code 1).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub artifacts: Vec<PathBuf>,
    pub infeasible: Option<String>,
}

pub fn load_group(cfg: &RunConfig) -> Result<FiniteGroup, CliError> {
    Ok(match &cfg.group {
        GroupSource::Cyclic(n) => FiniteGroup::cyclic(*n),
        GroupSource::Symmetric(n) => FiniteGroup::symmetric(*n),
        GroupSource::File(path) => {
            parse_group_table(&read_text(path)?).map_err(|source| CliError::Format { path: path.clone(), source })?
        }
    })
}

pub fn load_lengths(cfg: &RunConfig, group: &FiniteGroup) -> Result<LengthSpectrum, CliError> {
    Ok(match &cfg.lengths {
        LengthSource::Uniform(l) => LengthSpectrum::uniform(group, *l)?,
        LengthSource::File(path) => {
            parse_lengths(&read_text(path)?, group).map_err(|source| CliError::Format { path: path.clone(), source })?
        }
    })
}

fn load_spec(cfg: &RunConfig) -> Result<BoundaryChargeSpec, CliError> {
    let path = cfg.spec.as_ref().ok_or_else(|| missing("solve.spec"))?;
    parse_spec_csv(&read_text(path)?).map_err(|source| CliError::Format { path: path.clone(), source })
}

fn missing(field: &str) -> CliError {
    CliError::Config(crate::config::ConfigError::Missing { field: field.into() })
}

fn json_bytes(v: &impl serde::Serialize) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub fn run(mode: Mode, cfg: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    match mode {
        Mode::Solve => run_solve(cfg, out),
        Mode::Simulate => run_simulate(cfg, out),
        Mode::Sweep => run_sweep(cfg, out).map(|(s, _)| s),
        Mode::Compare => run_compare(cfg, out),
        Mode::Validate => run_validate(cfg, out),
    }
}

fn infeasible(e: &PlateauError) -> bool {
    matches!(e, PlateauError::NoFeasibleTopology | PlateauError::OddPointCount(_) | PlateauError::IntersectingOptimum)
}

fn run_solve(cfg: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    let group = load_group(cfg)?;
    let lengths = load_lengths(cfg, &group)?;
    let spec = load_spec(cfg)?;
    let opts = SolveOptions { max_steiner: cfg.max_steiner, runner_ups: cfg.runner_ups, ..SolveOptions::default() };
    info!("solving {} defects, group of order {}", spec.len(), group.order());
    match solve_plateau(&spec, &group, &lengths, &opts) {
        Ok(report) => {
            info!("mass {:.12}", report.mass);
            let a = write_atomic(out, "solve.json", &json_bytes(&solve_report_json(&report))?)?;
            let b = write_atomic(out, "chain.json", format!("{}\n", chain_to_json(&report.best)).as_bytes())?;
            Ok(RunSummary { artifacts: vec![a, b], infeasible: None })
        }
        Err(e) if infeasible(&e) => {
            warn!("infeasible: {e}");
            let body = serde_json::json!({ "status": "infeasible", "reason": e.to_string() });
            let a = write_atomic(out, "solve.json", &json_bytes(&body)?)?;
            Ok(RunSummary { artifacts: vec![a], infeasible: Some(e.to_string()) })
        }
        Err(e) => Err(e.into()),
    }
}

fn datum_of(kind: &DatumKind) -> Datum {
    match *kind {
        DatumKind::Pair { a, b } => Datum::Pair { a: a.normalize(), b: b.normalize() },
        DatumKind::FourPoint => Datum::FourPoint,
        DatumKind::Smooth { beta } => Datum::Smooth { beta },
        DatumKind::Constant { director } => Datum::Constant { director },
    }
}

/// Grid and boundary field described by `cfg`.
pub fn build_field(cfg: &RunConfig) -> Result<BoundaryField, CliError> {
    let grid = Arc::new(Grid::ball(cfg.n, cfg.radius)?);
    Ok(match cfg.datum {
        DatumKind::Pair { a, b } => plateau_sim::rp2_pair_datum(&a, &b, grid)?,
        ref other => BoundaryField::new(datum_of(other), grid)?,
    })
}

/// A finished simulation at one exponent.
pub struct Simulation {
    pub outcome: MinimizeOutcome,
    pub measure: EnergyMeasure,
    /// Extracted chain with boundary endpoints moved onto the declared
    /// defects.
    pub chain: Option<Chain>,
    /// Extracted chain as fitted.
    pub raw_chain: Option<Chain>,
    pub record: SweepRecord,
}

/// Minimize from the harmonic start and `cfg.restarts` perturbed copies;
/// keep the lowest energy (first wins on ties).
pub fn simulate(cfg: &RunConfig, field: &BoundaryField, p: f64, seed: u64) -> Result<Simulation, CliError> {
    let m = RealProjectivePlane;
    let opts = MinimizeOptions { tol: cfg.tol, max_iter: cfg.max_iter, ..MinimizeOptions::default() };
    let start = field.harmonic_start();
    let mut best = minimize(&start, p, &m, &opts)?;
    for k in 0..cfg.restarts {
        let mut u = start.clone();
        perturb(&mut u, cfg.perturb, &mut seed::stream(seed, &format!("restart-{k}")), &m)?;
        let o = minimize(&u, p, &m, &opts)?;
        if o.energy < best.energy {
            best = o;
        }
    }
    if best.status != plateau_sim::Status::Converged {
        warn!("p = {p}: minimizer stopped with status {:?}", best.status);
    }
    let grid = field.grid().clone();
    let h = grid.h;
    let measure = energy_measure(&best.map, p);
    let stress = stress_divergence_residual(&best.map, p).max;
    let r = cfg.eta_radius * h;
    let suspect = eta_regularity_map(&best.map, p, cfg.eta, r).map_err(CliError::Diagnostic)?;
    let mut suspect_nodes = 0;
    let mut interior = 0;
    for (i, &s) in suspect.iter().enumerate() {
        if s {
            suspect_nodes += 1;
            if grid.depth(&grid.position(i)) > r + h {
                interior += 1;
            }
        }
    }
    let radii: Vec<f64> =
        (2..).map(|k| k as f64 * h).take_while(|&x| x <= 0.9 * cfg.radius).collect::<Vec<_>>();
    let monotonicity = if radii.is_empty() {
        Vec::new()
    } else {
        monotonicity_profile(&best.map, p, &Point::zeros(), &radii)
            .map_err(CliError::Diagnostic)?
            .into_iter()
            .zip(&radii)
            .map(|(v, &r)| [r, v])
            .collect()
    };
    let ex_opts = ExtractOptions { absolute: cfg.threshold, ..ExtractOptions::default() };
    let (raw_chain, residuals) = match extract_singular_set(&measure, &grid, &ex_opts) {
        Ok(ex) => (Some(ex.chain), ex.residuals),
        Err(ExtractError::NoConcentration) => (None, Vec::new()),
        Err(e) => return Err(CliError::Extract(e)),
    };
    let chain = raw_chain.as_ref().map(|c| snap_to_spec(c, &field.spec, cfg.tube_radius * h));
    let segments: Vec<(Point, Point)> = raw_chain.as_ref().map(|c| c.segments()).unwrap_or_default();
    let tube = cfg.tube_radius * h;
    let densities = segments.iter().map(|(a, b)| segment_density(&measure, &grid, a, b, tube, None).density).collect();
    let density_along = segments.first().map(|(a, b)| density_profile(&measure, &grid, a, b, tube)).unwrap_or_default();
    info!(
        "p = {p}: energy {:.6}, rescaled {:.6}, {} iterations, {} segments",
        best.energy,
        measure.total,
        best.iterations,
        segments.len()
    );
    let record = SweepRecord {
        p,
        energy: best.energy,
        rescaled_total: measure.total,
        iterations: best.iterations,
        status: format!("{:?}", best.status),
        gradient_ratio: if best.initial_gradient > 0.0 { best.final_gradient / best.initial_gradient } else { 0.0 },
        stress_residual: stress,
        suspect_nodes,
        interior_suspect_nodes: interior,
        segments: segments.iter().map(|(a, b)| [[a.x, a.y, a.z], [b.x, b.y, b.z]]).collect(),
        fit_residuals: residuals,
        densities,
        monotonicity,
        density_along,
    };
    Ok(Simulation { outcome: best, measure, chain, raw_chain, record })
}

/// Move boundary vertices within `tol` of a declared defect onto it.
pub fn snap_to_spec(chain: &Chain, spec: &BoundaryChargeSpec, tol: f64) -> Chain {
    let mut out = chain.clone();
    for v in &mut out.vertices {
        if v.kind == VertexKind::Boundary {
            let best = spec
                .charges
                .iter()
                .map(|c| c.pos)
                .min_by(|a, b| (a - v.pos).norm().total_cmp(&(b - v.pos).norm()));
            if let Some(x) = best.filter(|x| (x - v.pos).norm() <= tol) {
                v.pos = x;
            }
        }
    }
    out
}

/// Line density in slabs of width `2h` along `[a, b]`.
fn density_profile(m: &EnergyMeasure, grid: &Grid, a: &Point, b: &Point, tube: f64) -> Vec<[f64; 2]> {
    let len = (b - a).norm();
    let width = 2.0 * grid.h;
    let bins = ((len / width).ceil() as usize).max(1);
    let mut mass = vec![0.0; bins];
    let dir = (b - a) / len;
    for &c in grid.cells() {
        let x = grid.cell_center(c);
        if point_segment_distance(&x, a, b) <= tube {
            let t = (x - a).dot(&dir).clamp(0.0, len);
            mass[((t / width) as usize).min(bins - 1)] += m.density[c];
        }
    }
    mass.iter()
        .enumerate()
        .map(|(i, &mv)| {
            let lo = i as f64 * width;
            let hi = (lo + width).min(len);
            [(lo + hi) / 2.0, mv / (hi - lo)]
        })
        .collect()
}

fn run_simulate(cfg: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    let field = build_field(cfg)?;
    let sim = simulate(cfg, &field, cfg.p, cfg.seed)?;
    let seminorm = fractional_seminorm(&field.map, 0.5, 2.0)?;
    let mut artifacts = vec![
        write_atomic(out, "field.bin", &sim.outcome.map.to_dump().to_bytes())?,
        write_atomic(out, "measure.csv", sim.measure.to_csv().as_bytes())?,
    ];
    let diagnostics = serde_json::json!({
        "record": sim.record,
        "seminorm": seminorm,
        "bound_ratio": if seminorm > 0.0 { Some(sim.record.rescaled_total / seminorm) } else { None },
        "h": field.grid().h,
        "chain": sim.chain.as_ref().map(ChainJson::from),
    });
    artifacts.push(write_atomic(out, "diagnostics.json", &json_bytes(&diagnostics)?)?);
    if let Some(chain) = &sim.chain {
        artifacts.push(write_atomic(out, "chain.json", format!("{}\n", chain_to_json(chain)).as_bytes())?);
    }
    artifacts.extend(emit_plot_data(out, std::slice::from_ref(&sim.record))?);
    Ok(RunSummary { artifacts, infeasible: None })
}

/// Simulate every exponent of `cfg.p_list` (in parallel) and write
/// `sweep.jsonl` plus plot data.
pub fn run_sweep(cfg: &RunConfig, out: &Path) -> Result<(RunSummary, Vec<Simulation>), CliError> {
    let field = build_field(cfg)?;
    let sims: Vec<Simulation> =
        cfg.p_list.par_iter().map(|&p| simulate(cfg, &field, p, cfg.seed)).collect::<Result<_, _>>()?;
    let mut lines = String::new();
    for s in &sims {
        lines.push_str(&serde_json::to_string(&s.record)?);
        lines.push('\n');
    }
    let records: Vec<SweepRecord> = sims.iter().map(|s| s.record.clone()).collect();
    let mut artifacts = vec![write_atomic(out, "sweep.jsonl", lines.as_bytes())?];
    artifacts.extend(emit_plot_data(out, &records)?);
    Ok((RunSummary { artifacts, infeasible: None }, sims))
}

/// Sweep, then set the concentration set at the largest exponent against
/// the solver optimum for the datum's declared defects.
pub fn compare(cfg: &RunConfig, out: &Path) -> Result<(RunSummary, CompareReport), CliError> {
    let field = build_field(cfg)?;
    let group = load_group(cfg)?;
    let lengths = load_lengths(cfg, &group)?;
    let table: EnergyTable = ResolutionSearch::new(&group, &lengths)?.table(2.0)?;
    let (solver_mass, solver_chain) = if field.spec.is_empty() {
        (0.0, Chain::default())
    } else if group.order() == 2 {
        let w = table.energy(1).unwrap_or(0.0);
        let r = plateau_core::minimal_connection_matching(&field.spec.points(), w, 1, &MatchingOptions::default())?;
        (r.mass, r.best)
    } else {
        let r = solve_plateau(&field.spec, &group, &lengths, &SolveOptions::default())?;
        (r.mass, r.best)
    };
    let (mut summary, sims) = run_sweep(cfg, out)?;
    let records: Vec<SweepRecord> = sims.iter().map(|s| s.record.clone()).collect();
    let extrapolated = extrapolate(&records)?;
    let last = sims.iter().max_by(|a, b| a.record.p.total_cmp(&b.record.p)).expect("nonempty sweep");
    let grid = field.grid();
    let tube = cfg.tube_radius * grid.h;
    let mut densities = Vec::new();
    let mut tube_mass = 0.0;
    let mut hausdorff = None;
    if let Some(chain) = &last.raw_chain {
        for (edge, (a, b)) in chain.segments().iter().enumerate() {
            let est = segment_density(&last.measure, grid, a, b, tube, Some(&table));
            tube_mass += est.density * (b - a).norm();
            densities.push(DensityGap {
                edge,
                density: est.density,
                class: est.matched.map(|m| m.0),
                table_value: est.matched.map(|m| m.1),
                gap: est.gap,
            });
        }
        if !solver_chain.edges.is_empty() {
            hausdorff = Some(hausdorff_segments(&chain.segments(), &solver_chain.segments(), 100));
        }
    }
    let report = CompareReport {
        solver_mass,
        solver_chain: serde_json::to_value(ChainJson::from(&solver_chain))?,
        extracted_chain: last.chain.as_ref().map(|c| serde_json::to_value(ChainJson::from(c))).transpose()?,
        tube_mass,
        hausdorff,
        h: grid.h,
        densities,
        sweep: records.iter().map(|r| [r.p, r.rescaled_total]).collect(),
        extrapolated_mass: extrapolated,
        relative_error: if solver_mass > 0.0 { (extrapolated - solver_mass).abs() / solver_mass } else { extrapolated.abs() },
    };
    info!("extrapolated mass {:.6} vs solver {:.6}", extrapolated, solver_mass);
    summary.artifacts.push(write_atomic(out, "compare.json", &json_bytes(&report)?)?);
    Ok((summary, report))
}

fn run_compare(cfg: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    compare(cfg, out).map(|(s, _)| s)
}

fn run_validate(cfg: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    let group = load_group(cfg)?;
    let spec = load_spec(cfg)?;
    let path = cfg.chain.as_ref().ok_or_else(|| missing("solve.chain"))?;
    let chain = parse_chain_json(&read_text(path)?).map_err(|source| CliError::Format { path: path.clone(), source })?;
    let report = validate_chain(&chain, &spec, &group);
    let lengths = load_lengths(cfg, &group)?;
    let table = ResolutionSearch::new(&group, &lengths)?.table(2.0)?;
    let mass = plateau_core::chain_mass(&chain, &table).ok().map(|m| m.total_mass);
    let body = serde_json::json!({
        "valid": report.is_valid(),
        "necessary_only": report.necessary_only,
        "violations": report.violations,
        "mass": mass,
    });
    let a = write_atomic(out, "validation.json", &json_bytes(&body)?)?;
    let infeasible = (!report.is_valid()).then(|| format!("{} violation(s)", report.violations.len()));
    Ok(RunSummary { artifacts: vec![a], infeasible })
}
