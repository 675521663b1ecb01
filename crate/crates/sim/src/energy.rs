//! Discrete p-energy, its gradient, the rescaled energy measure and the
//! stress-tensor diagnostics.
//!
//! Cell `c` (a node whose `+x`, `+y`, `+z` neighbours are active) carries
//! the forward-difference gradient `∂_d u ≈ (u(c + e_d) − u(c)) / h` and the
//! energy `h³ |D_h u|^p / p`.

use nalgebra::{Matrix3, SymmetricEigen};
use plateau_core::Point;
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::GridMap;

/// Regularization of `|Du|^(p−2)` in the gradient.
pub const GRADIENT_EPS: f64 = 1e-8;

const CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticError {
    #[error("exponent p = {0} outside [1, 2]")]
    InvalidExponent(f64),
    #[error("ball of radius {radius} around {center:?} leaves the domain")]
    BallOutsideDomain { center: [f64; 3], radius: f64 },
    #[error("radius {radius} below three grid spacings ({min})")]
    RadiusTooSmall { radius: f64, min: f64 },
    #[error("no radii given")]
    NoRadii,
}

pub(crate) fn check_p(p: f64) -> Result<(), DiagnosticError> {
    if (1.0..=2.0).contains(&p) {
        Ok(())
    } else {
        Err(DiagnosticError::InvalidExponent(p))
    }
}

/// Sum of `f(cell)` over all cells in a fixed chunking, so the result does
/// not depend on the number of threads.
fn cell_sum(u: &GridMap, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    u.grid
        .cells()
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().map(|&c| f(c)).sum::<f64>())
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// `|D_h u|²` at the cell based at `c`.
pub fn cell_grad_sq(u: &GridMap, c: usize) -> f64 {
    let g = &u.grid;
    let base = u.value(c);
    let mut s = 0.0;
    for a in 0..3 {
        let nb = u.value(c + g.stride(a));
        s += nb.iter().zip(base).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    }
    s / (g.h * g.h)
}

/// `(D_h u)ᵀ D_h u`, the 3×3 Gram matrix of the spatial derivatives.
pub fn cell_gram(u: &GridMap, c: usize) -> Matrix3<f64> {
    let g = &u.grid;
    let base = u.value(c);
    let diffs: Vec<Vec<f64>> = (0..3)
        .map(|a| u.value(c + g.stride(a)).iter().zip(base).map(|(x, y)| (x - y) / g.h).collect())
        .collect();
    Matrix3::from_fn(|i, j| diffs[i].iter().zip(&diffs[j]).map(|(x, y)| x * y).sum())
}

/// `Σ_cells h³ |D_h u|^p / p`.
pub fn p_energy(u: &GridMap, p: f64) -> f64 {
    let h3 = u.grid.h.powi(3);
    cell_sum(u, |c| h3 * cell_grad_sq(u, c).powf(p / 2.0) / p)
}

/// Energy and its Euclidean gradient with respect to every node value
/// (zero rows for inactive nodes). The weight `|Du|^(p−2)` is regularized by
/// `GRADIENT_EPS`; the energy itself is not.
pub fn energy_and_gradient(u: &GridMap, p: f64) -> (f64, Vec<f64>) {
    let g = &u.grid;
    let n = g.node_count();
    let nu = u.nu;
    let h = g.h;
    let h3 = h.powi(3);
    // Per-node cell weight h (s + ε²)^((p−2)/2); NaN marks non-cells.
    let mut weight = vec![f64::NAN; n];
    let cells = g.cells();
    let vals: Vec<(usize, f64, f64)> = cells
        .par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            chunk.iter().map(|&c| {
                let s = cell_grad_sq(u, c);
                (c, h * (s + GRADIENT_EPS * GRADIENT_EPS).powf((p - 2.0) / 2.0), h3 * s.powf(p / 2.0) / p)
            })
        })
        .collect();
    let energy: f64 = vals.par_chunks(CHUNK).map(|ch| ch.iter().map(|v| v.2).sum::<f64>()).collect::<Vec<_>>().iter().sum();
    for &(c, w, _) in &vals {
        weight[c] = w;
    }
    let strides = [g.stride(0), g.stride(1), g.stride(2)];
    let mut grad = vec![0.0; n * nu];
    grad.par_chunks_mut(nu).enumerate().for_each(|(i, gi)| {
        if !g.is_active(i) {
            return;
        }
        let ui = u.value(i);
        if !weight[i].is_nan() {
            for s in strides {
                let un = u.value(i + s);
                for k in 0..nu {
                    gi[k] -= weight[i] * (un[k] - ui[k]);
                }
            }
        }
        for s in strides {
            if i >= s && !weight[i - s].is_nan() {
                let up = u.value(i - s);
                for k in 0..nu {
                    gi[k] += weight[i - s] * (ui[k] - up[k]);
                }
            }
        }
    });
    (energy, grad)
}

/// The rescaled energy measure `(2 − p) |D_h u|^p / p · h³` per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMeasure {
    pub p: f64,
    pub h: f64,
    pub dims: [usize; 3],
    /// Indexed by node; zero at nodes that are not cells.
    pub density: Vec<f64>,
    pub total: f64,
}

impl EnergyMeasure {
    /// `i,j,k,density` rows for every cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,k,density\n");
        let [_, n2, n3] = self.dims;
        for (idx, d) in self.density.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            let (i, j, k) = (idx / (n2 * n3), (idx / n3) % n2, idx % n3);
            out.push_str(&format!("{i},{j},{k},{d:?}\n"));
        }
        out
    }

    pub fn cell_center(&self, idx: usize, origin: &Point) -> Point {
        let [_, n2, n3] = self.dims;
        let c = Point::new((idx / (n2 * n3)) as f64, ((idx / n3) % n2) as f64, (idx % n3) as f64);
        origin + (c + Point::new(0.5, 0.5, 0.5)) * self.h
    }
}

pub fn energy_measure(u: &GridMap, p: f64) -> EnergyMeasure {
    let g = &u.grid;
    let h3 = g.h.powi(3);
    let mut density = vec![0.0; g.node_count()];
    let vals: Vec<(usize, f64)> = g
        .cells()
        .par_iter()
        .map(|&c| (c, (2.0 - p) * h3 * cell_grad_sq(u, c).powf(p / 2.0) / p))
        .collect();
    for &(c, d) in &vals {
        density[c] = d;
    }
    let total = vals.par_chunks(CHUNK).map(|ch| ch.iter().map(|v| v.1).sum::<f64>()).collect::<Vec<_>>().iter().sum();
    EnergyMeasure { p, h: g.h, dims: g.dims, density, total }
}

/// `T = (|Du|^p/p) Id − |Du|^(p−2) DuᵀDu` at the cell based at `c`.
pub fn cell_stress(u: &GridMap, c: usize, p: f64) -> Matrix3<f64> {
    let m = cell_gram(u, c);
    let s = m.trace();
    if s == 0.0 {
        return Matrix3::zeros();
    }
    Matrix3::identity() * (s.powf(p / 2.0) / p) - m * s.powf((p - 2.0) / 2.0)
}

/// Algebraic checks on one stress tensor, relative to `|Du|^p / p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressCheck {
    pub symmetry: f64,
    /// `|tr T − ((3 − p)/p) |Du|^p|`
    pub trace: f64,
    /// `‖T‖_F − √(3 − 2p + p²) |Du|^p / p`; zero for rank-one `Du` and
    /// never positive.
    pub frobenius_excess: f64,
    /// Largest eigenvalue minus `|Du|^p / p`; never positive.
    pub eigen_excess: f64,
    pub rank_one: bool,
}

pub fn check_stress(u: &GridMap, c: usize, p: f64) -> StressCheck {
    let t = cell_stress(u, c, p);
    let m = cell_gram(u, c);
    let s = m.trace();
    let a = s.powf(p / 2.0) / p;
    let scale = a.max(f64::MIN_POSITIVE);
    let eig = SymmetricEigen::new(m);
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let rank_one = ev[1] <= 1e-12 * s.max(f64::MIN_POSITIVE);
    let te = SymmetricEigen::new(t).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    StressCheck {
        symmetry: (t - t.transpose()).norm() / scale,
        trace: (t.trace() - (3.0 - p) / p * s.powf(p / 2.0)).abs() / scale,
        frobenius_excess: (t.norm() - (3.0 - 2.0 * p + p * p).sqrt() * a) / scale,
        eigen_excess: (te - a) / scale,
        rank_one,
    }
}

/// Discrete divergence of the stress tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    /// Per node, NaN where the node is not a test node.
    pub per_node: Vec<f64>,
    pub max: f64,
    pub argmax: Option<usize>,
}

/// Tests `Σ_cells h³ T : D_h ξ` against the hat fields `ξ = e_k φ_i` at every
/// inside node whose four adjacent cells exist, normalized by `h³`; the
/// result is the backward-difference divergence of the cellwise stress.
pub fn stress_divergence_residual(u: &GridMap, p: f64) -> DivergenceReport {
    stress_divergence_where(u, p, |_| true)
}

/// As [`stress_divergence_residual`], restricted to nodes accepted by `keep`.
pub fn stress_divergence_where(u: &GridMap, p: f64, keep: impl Fn(&Point) -> bool + Sync) -> DivergenceReport {
    let g = &u.grid;
    let n = g.node_count();
    let mut stress: Vec<Option<Matrix3<f64>>> = vec![None; n];
    let vals: Vec<(usize, Matrix3<f64>)> = g.cells().par_iter().map(|&c| (c, cell_stress(u, c, p))).collect();
    for (c, t) in vals {
        stress[c] = Some(t);
    }
    let strides = [g.stride(0), g.stride(1), g.stride(2)];
    let per_node: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            if g.kind(i) != crate::grid::NodeKind::Inside || !keep(&g.position(i)) {
                return f64::NAN;
            }
            let Some(ti) = stress[i] else { return f64::NAN };
            let mut r = [0.0; 3];
            for (d, &s) in strides.iter().enumerate() {
                let Some(tm) = (i >= s).then(|| stress[i - s]).flatten() else { return f64::NAN };
                for (k, rk) in r.iter_mut().enumerate() {
                    *rk += (tm[(k, d)] - ti[(k, d)]) / g.h;
                }
            }
            (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
        })
        .collect();
    let mut max = 0.0;
    let mut argmax = None;
    for (i, &v) in per_node.iter().enumerate() {
        if v.is_finite() && v > max {
            max = v;
            argmax = Some(i);
        }
    }
    DivergenceReport { per_node, max, argmax }
}

/// Weight of a cell centred `dist` from a ball centre: one inside, zero
/// outside, linear over one cell width across the sphere.
pub(crate) fn ramp(dist: f64, r: f64, h: f64) -> f64 {
    ((r - dist) / h + 0.5).clamp(0.0, 1.0)
}

/// `∫_{B_r(x)} |Du|^p / p` with smoothed ball indicator, for each radius.
pub fn ball_energies(u: &GridMap, p: f64, x0: &Point, radii: &[f64]) -> Vec<f64> {
    let g = &u.grid;
    let h3 = g.h.powi(3);
    let rmax = radii.iter().copied().fold(0.0, f64::max);
    let near: Vec<(f64, f64)> = g
        .cells()
        .iter()
        .filter_map(|&c| {
            let d = (g.cell_center(c) - x0).norm();
            (d <= rmax + g.h).then(|| (d, h3 * cell_grad_sq(u, c).powf(p / 2.0) / p))
        })
        .collect();
    radii.iter().map(|&r| near.iter().map(|&(d, e)| ramp(d, r, g.h) * e).sum()).collect()
}

/// `r ↦ r^(p−3) ∫_{B_r(x₀)} |Du|^p / p` for each radius.
pub fn monotonicity_profile(u: &GridMap, p: f64, x0: &Point, radii: &[f64]) -> Result<Vec<f64>, DiagnosticError> {
    check_p(p)?;
    if radii.is_empty() {
        return Err(DiagnosticError::NoRadii);
    }
    let rmax = radii.iter().copied().fold(0.0, f64::max);
    if u.grid.depth(x0) < rmax {
        return Err(DiagnosticError::BallOutsideDomain { center: [x0.x, x0.y, x0.z], radius: rmax });
    }
    let e = ball_energies(u, p, x0, radii);
    Ok(radii.iter().zip(e).map(|(&r, e)| r.powf(p - 3.0) * e).collect())
}

/// Largest decrease between consecutive entries (zero for a nondecreasing
/// profile), relative to the largest entry.
pub fn profile_violation(profile: &[f64]) -> f64 {
    let top = profile.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    profile.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max) / top
}

/// Per node: `true` (suspect) when `(2 − p) ∫_{B_r} |Du|^p / p > η r^(3−p)`.
/// Inactive nodes are `false`.
pub fn eta_regularity_map(u: &GridMap, p: f64, eta: f64, r: f64) -> Result<Vec<bool>, DiagnosticError> {
    check_p(p)?;
    let g = &u.grid;
    if r < 3.0 * g.h * (1.0 - 1e-12) {
        return Err(DiagnosticError::RadiusTooSmall { radius: r, min: 3.0 * g.h });
    }
    let h3 = g.h.powi(3);
    let mut cell_e = vec![0.0; g.node_count()];
    let vals: Vec<(usize, f64)> =
        g.cells().par_iter().map(|&c| (c, h3 * cell_grad_sq(u, c).powf(p / 2.0) / p)).collect();
    for (c, e) in vals {
        cell_e[c] = e;
    }
    let reach = (r / g.h + 1.0).ceil() as i64;
    let mut offsets: Vec<([i64; 3], f64)> = Vec::new();
    for a in -reach - 1..=reach {
        for b in -reach - 1..=reach {
            for c in -reach - 1..=reach {
                let center = Point::new(a as f64 + 0.5, b as f64 + 0.5, c as f64 + 0.5) * g.h;
                let w = ramp(center.norm(), r, g.h);
                if w > 0.0 {
                    offsets.push(([a, b, c], w));
                }
            }
        }
    }
    let threshold = eta * r.powf(3.0 - p);
    let dims = g.dims;
    Ok((0..g.node_count())
        .into_par_iter()
        .map(|i| {
            if !g.is_active(i) {
                return false;
            }
            let base = g.coords(i);
            let mut e = 0.0;
            for (o, w) in &offsets {
                let mut idx = [0usize; 3];
                let mut ok = true;
                for ax in 0..3 {
                    let v = base[ax] as i64 + o[ax];
                    if v < 0 || v >= dims[ax] as i64 {
                        ok = false;
                        break;
                    }
                    idx[ax] = v as usize;
                }
                if ok {
                    e += w * cell_e[g.index(idx[0], idx[1], idx[2])];
                }
            }
            (2.0 - p) * e > threshold
        })
        .collect())
}
