//! Concentration set of an energy measure: thresholding, clustering and
//! segment fits; charges and line densities of the fitted segments.

use std::collections::VecDeque;

use nalgebra::{Matrix3, SymmetricEigen};
use plateau_core::geometry::point_segment_distance;
use plateau_core::{Chain, ClassId, EnergyTable, Point, Provenance, VertexKind};
use thiserror::Error;

use crate::energy::{ramp, EnergyMeasure};
use crate::grid::{Grid, GridMap};
use crate::manifold::{ManifoldError, TargetManifold};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error("no cell reaches the concentration threshold")]
    NoConcentration,
    #[error("measure and grid have different shapes")]
    ShapeMismatch,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChargeError {
    #[error("loop sample {0} falls outside the domain")]
    LoopOutsideDomain(usize),
    #[error("loop meets the singular set: {0}")]
    LoopHitsSingularSet(ManifoldError),
    #[error("degenerate segment")]
    DegenerateSegment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    /// Ball radius for the linear density, in grid spacings.
    pub radius: f64,
    /// Cells are kept when their ball linear density `μ(B_ρ)/(2ρ)` is at
    /// least `max(absolute, relative × largest)`.
    pub absolute: f64,
    pub relative: f64,
    /// Clusters with fewer cells are dropped.
    pub min_cells: usize,
    /// A cluster whose slice centroids have RMS distance to its axis above
    /// this many spacings is split in two.
    pub split_tol: f64,
    /// Segments are merged when their directions differ by less than this
    /// angle (degrees) and they lie on a common line.
    pub merge_angle: f64,
    /// Endpoints closer than this many spacings are joined; endpoints this
    /// close to the domain boundary become boundary vertices.
    pub snap: f64,
    /// Class carried by the extracted edges.
    pub class: ClassId,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            radius: 2.0,
            absolute: 0.05,
            relative: 0.3,
            min_cells: 4,
            split_tol: 1.0,
            merge_angle: 15.0,
            snap: 2.0,
            class: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub chain: Chain,
    /// RMS distance of each edge's slice centroids from the fitted line.
    pub residuals: Vec<f64>,
    pub flagged_cells: usize,
    pub max_density: f64,
}

/// Ball linear density `μ(B_ρ(x_c)) / (2ρ)` at every cell centre (zero at
/// non-cells), with `ρ = radius · h` and a one-cell linear ramp.
pub fn ball_linear_density(m: &EnergyMeasure, grid: &Grid, radius: f64) -> Vec<f64> {
    let rho = radius * grid.h;
    let reach = radius.ceil() as i64 + 1;
    let mut offsets = Vec::new();
    for a in -reach..=reach {
        for b in -reach..=reach {
            for c in -reach..=reach {
                let d = Point::new(a as f64, b as f64, c as f64).norm() * grid.h;
                let w = ramp(d, rho, grid.h);
                if w > 0.0 {
                    offsets.push(([a, b, c], w));
                }
            }
        }
    }
    let mut out = vec![0.0; grid.node_count()];
    for &c in grid.cells() {
        let base = grid.coords(c);
        let mut mass = 0.0;
        for (o, w) in &offsets {
            let mut idx = [0usize; 3];
            let mut inside = true;
            for ax in 0..3 {
                let v = base[ax] as i64 + o[ax];
                if v < 0 || v >= grid.dims[ax] as i64 {
                    inside = false;
                    break;
                }
                idx[ax] = v as usize;
            }
            if inside {
                mass += w * m.density[grid.index(idx[0], idx[1], idx[2])];
            }
        }
        out[c] = mass / (2.0 * rho);
    }
    out
}

struct Fit {
    center: Point,
    axis: Point,
    lo: f64,
    hi: f64,
    rms: f64,
}

fn fit(points: &[(Point, f64)], h: f64) -> Fit {
    let wsum: f64 = points.iter().map(|p| p.1).sum();
    let center = points.iter().map(|(x, w)| x * *w).sum::<Point>() / wsum;
    let mut cov = Matrix3::zeros();
    for (x, w) in points {
        let d = x - center;
        cov += d * d.transpose() * *w;
    }
    let eig = SymmetricEigen::new(cov);
    let k = (0..3).max_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j])).unwrap();
    let mut axis: Point = eig.eigenvectors.column(k).into_owned();
    // Deterministic orientation.
    let lead = (0..3).max_by(|&i, &j| axis[i].abs().total_cmp(&axis[j].abs())).unwrap();
    if axis[lead] < 0.0 {
        axis = -axis;
    }
    let ts: Vec<f64> = points.iter().map(|(x, _)| (x - center).dot(&axis)).collect();
    // A ball centred on the end of a uniform line sees half the line it sees
    // in the middle, so the extent is taken over cells above half the upper decile.
    let mut ws: Vec<f64> = points.iter().map(|p| p.1).collect();
    ws.sort_by(f64::total_cmp);
    let cut = 0.5 * ws[ws.len() * 9 / 10];
    let kept = || points.iter().zip(&ts).filter(|((_, w), _)| *w >= cut).map(|(_, t)| *t);
    let lo = kept().fold(f64::INFINITY, f64::min);
    let hi = kept().fold(f64::NEG_INFINITY, f64::max);
    // Deviation of the slice centroids from the axis: measures bending, not
    // the thickness of the tube.
    let bins = (((hi - lo) / (2.0 * h)).ceil() as usize).max(1);
    let mut sums = vec![(Point::zeros(), 0.0); bins];
    for ((x, w), t) in points.iter().zip(&ts) {
        let b = (((t - lo) / (2.0 * h)).max(0.0) as usize).min(bins - 1);
        sums[b].0 += x * *w;
        sums[b].1 += w;
    }
    let mut sq = 0.0;
    let mut wt = 0.0;
    for (s, w) in sums {
        if w > 0.0 {
            let d = s / w - center;
            sq += w * (d - axis * d.dot(&axis)).norm_squared();
            wt += w;
        }
    }
    Fit { center, axis, lo, hi, rms: (sq / wt).sqrt() }
}

fn split_fit(points: Vec<(Point, f64)>, opts: &ExtractOptions, h: f64, depth: usize, out: &mut Vec<Vec<(Point, f64)>>) {
    let f = fit(&points, h);
    if f.rms <= opts.split_tol * h || points.len() < 2 * opts.min_cells || depth >= 6 {
        out.push(points);
        return;
    }
    let (a, b): (Vec<_>, Vec<_>) = points.into_iter().partition(|(x, _)| (x - f.center).dot(&f.axis) < 0.0);
    for part in [a, b] {
        if part.len() >= opts.min_cells {
            split_fit(part, opts, h, depth + 1, out);
        }
    }
}

/// Fit a chain of straight segments to the concentration set of `m`.
pub fn extract_singular_set(m: &EnergyMeasure, grid: &Grid, opts: &ExtractOptions) -> Result<Extraction, ExtractError> {
    if m.dims != grid.dims || m.density.len() != grid.node_count() {
        return Err(ExtractError::ShapeMismatch);
    }
    let h = grid.h;
    let dens = ball_linear_density(m, grid, opts.radius);
    let max_density = dens.iter().copied().fold(0.0, f64::max);
    let threshold = opts.absolute.max(opts.relative * max_density);
    let flagged: Vec<bool> = dens.iter().map(|&d| d > 0.0 && d >= threshold).collect();
    let flagged_cells = flagged.iter().filter(|&&f| f).count();
    if flagged_cells == 0 {
        return Err(ExtractError::NoConcentration);
    }

    // 26-connected clusters.
    let mut label = vec![usize::MAX; grid.node_count()];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for start in 0..grid.node_count() {
        if !flagged[start] || label[start] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut members = Vec::new();
        let mut queue = VecDeque::from([start]);
        label[start] = id;
        while let Some(c) = queue.pop_front() {
            members.push(c);
            let [i, j, k] = grid.coords(c);
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    for dk in -1i64..=1 {
                        let (a, b, e) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                        if a < 0 || b < 0 || e < 0 {
                            continue;
                        }
                        let (a, b, e) = (a as usize, b as usize, e as usize);
                        if a >= grid.dims[0] || b >= grid.dims[1] || e >= grid.dims[2] {
                            continue;
                        }
                        let n = grid.index(a, b, e);
                        if flagged[n] && label[n] == usize::MAX {
                            label[n] = id;
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
        clusters.push(members);
    }

    let mut pieces = Vec::new();
    for cl in clusters {
        if cl.len() < opts.min_cells {
            continue;
        }
        let pts: Vec<(Point, f64)> = cl.iter().map(|&c| (grid.cell_center(c), dens[c])).collect();
        split_fit(pts, opts, h, 0, &mut pieces);
    }
    if pieces.is_empty() {
        return Err(ExtractError::NoConcentration);
    }

    // Merge collinear neighbours.
    let cos_tol = opts.merge_angle.to_radians().cos();
    loop {
        let fits: Vec<Fit> = pieces.iter().map(|p| fit(p, h)).collect();
        let mut merged = None;
        'outer: for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                let (a, b) = (&fits[i], &fits[j]);
                if a.axis.dot(&b.axis).abs() < cos_tol {
                    continue;
                }
                let ends = |f: &Fit| [f.center + f.axis * f.lo, f.center + f.axis * f.hi];
                let gap = ends(a)
                    .iter()
                    .flat_map(|p| ends(b).map(|q| (p - q).norm()))
                    .fold(f64::INFINITY, f64::min);
                let off_line = ends(b)
                    .iter()
                    .map(|q| {
                        let d = q - a.center;
                        (d - a.axis * d.dot(&a.axis)).norm()
                    })
                    .fold(0.0, f64::max);
                if gap <= opts.snap * h && off_line <= 2.0 * opts.split_tol * h {
                    merged = Some((i, j));
                    break 'outer;
                }
            }
        }
        let Some((i, j)) = merged else { break };
        let b = pieces.remove(j);
        pieces[i].extend(b);
    }

    let mut chain = Chain { provenance: Some(Provenance::ExtractedFromSimulation), ..Chain::default() };
    let mut residuals = Vec::new();
    let snap = opts.snap * h;
    let vertex_for = |chain: &mut Chain, x: Point| -> usize {
        if let Some(v) = chain.vertices.iter().position(|v| (v.pos - x).norm() <= snap) {
            return v;
        }
        let kind = if grid.depth(&x) <= snap { VertexKind::Boundary } else { VertexKind::Interior };
        chain.add_vertex(x, kind)
    };
    for piece in &pieces {
        let f = fit(piece, h);
        if f.hi - f.lo <= 0.0 {
            continue;
        }
        let a = vertex_for(&mut chain, f.center + f.axis * f.lo);
        let b = vertex_for(&mut chain, f.center + f.axis * f.hi);
        if a != b {
            chain.add_edge(a, b, opts.class);
            residuals.push(f.rms);
        }
    }
    if chain.edges.is_empty() {
        return Err(ExtractError::NoConcentration);
    }
    Ok(Extraction { chain, residuals, flagged_cells, max_density })
}

/// Class of `u` on a circle of `radius` around the midpoint of `[a, b]`, in
/// the plane orthogonal to the segment.
pub fn detect_charge(
    u: &GridMap,
    m: &dyn TargetManifold,
    a: &Point,
    b: &Point,
    radius: f64,
) -> Result<ClassId, ChargeError> {
    let axis = b - a;
    if axis.norm() == 0.0 {
        return Err(ChargeError::DegenerateSegment);
    }
    detect_charge_at(u, m, &((a + b) / 2.0), &axis, radius)
}

/// Class of `u` on the circle of `radius` around `center` orthogonal to
/// `normal`.
pub fn detect_charge_at(
    u: &GridMap,
    m: &dyn TargetManifold,
    center: &Point,
    normal: &Point,
    radius: f64,
) -> Result<ClassId, ChargeError> {
    let n = normal.normalize();
    let helper = if n.x.abs() < 0.9 { Point::x() } else { Point::y() };
    let e1 = (helper - n * helper.dot(&n)).normalize();
    let e2 = n.cross(&e1);
    let samples = ((std::f64::consts::TAU * radius / (u.grid.h / 4.0)).ceil() as usize).max(64);
    let mut pts = Vec::with_capacity(samples);
    let mut out = vec![0.0; u.nu];
    for k in 0..samples {
        let t = std::f64::consts::TAU * k as f64 / samples as f64;
        let x = center + (e1 * t.cos() + e2 * t.sin()) * radius;
        let v = u.interpolate(&x).ok_or(ChargeError::LoopOutsideDomain(k))?;
        m.project(&v, &mut out).map_err(ChargeError::LoopHitsSingularSet)?;
        pts.push(out.clone());
    }
    m.loop_class(&pts).map_err(ChargeError::LoopHitsSingularSet)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    /// Measure in the capsule around the segment divided by its length.
    pub density: f64,
    /// Nearest nonzero table value and its class, if any.
    pub matched: Option<(ClassId, f64)>,
    /// `|density − matched| / matched`.
    pub gap: Option<f64>,
}

/// Line density of `m` along `[a, b]`, counting cells whose centres lie
/// within `radius` of the segment.
pub fn segment_density(
    m: &EnergyMeasure,
    grid: &Grid,
    a: &Point,
    b: &Point,
    radius: f64,
    table: Option<&EnergyTable>,
) -> DensityEstimate {
    let len = (b - a).norm();
    let mut mass = 0.0;
    for &c in grid.cells() {
        if point_segment_distance(&grid.cell_center(c), a, b) <= radius {
            mass += m.density[c];
        }
    }
    let density = if len > 0.0 { mass / len } else { 0.0 };
    let matched = table.filter(|_| density > 0.0).and_then(|t| {
        t.energies
            .iter()
            .enumerate()
            .filter(|(_, e)| **e > 0.0 && e.is_finite())
            .min_by(|x, y| (x.1 - density).abs().total_cmp(&(y.1 - density).abs()))
            .map(|(c, e)| (c, *e))
    });
    let gap = matched.map(|(_, e)| (density - e).abs() / e);
    DensityEstimate { density, matched, gap }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tube_measure(grid: &Grid, a: Point, b: Point, density: f64, r: f64) -> EnergyMeasure {
        let mut d = vec![0.0; grid.node_count()];
        let inside: Vec<usize> =
            grid.cells().iter().copied().filter(|&c| point_segment_distance(&grid.cell_center(c), &a, &b) <= r).collect();
        // Normalize so the mass per unit length is exact.
        let per_cell = density * (b - a).norm() / inside.len() as f64;
        for c in inside {
            d[c] = per_cell;
        }
        let total = d.iter().sum();
        EnergyMeasure { p: 1.9, h: grid.h, dims: grid.dims, density: d, total }
    }

    #[test]
    fn zero_measure_has_no_concentration() {
        let g = Grid::ball(12, 1.0).unwrap();
        let m = EnergyMeasure { p: 1.9, h: g.h, dims: g.dims, density: vec![0.0; g.node_count()], total: 0.0 };
        assert_eq!(extract_singular_set(&m, &g, &ExtractOptions::default()), Err(ExtractError::NoConcentration));
        let est = segment_density(&m, &g, &Point::new(0.0, 0.0, -0.5), &Point::new(0.0, 0.0, 0.5), 0.2, None);
        assert_eq!(est.density, 0.0);
        assert!(est.matched.is_none());
    }

    #[test]
    fn synthetic_tube_is_recovered() {
        let g = Grid::ball(20, 1.0).unwrap();
        let a = Point::new(-0.4, 0.1, -0.5);
        let b = Point::new(0.5, -0.2, 0.45);
        let m = tube_measure(&g, a, b, PI / 2.0, 1.5 * g.h);
        let ex = extract_singular_set(&m, &g, &ExtractOptions::default()).unwrap();
        assert_eq!(ex.chain.edges.len(), 1);
        let segs = ex.chain.segments();
        let d = plateau_core::geometry::hausdorff_segments(&segs, &[(a, b)], 50);
        assert!(d <= g.h, "hausdorff {d} vs h {} {segs:?}", g.h);
        let table = EnergyTable { p: 2.0, energies: vec![0.0, PI / 2.0], witness: Vec::new() };
        let est = segment_density(&m, &g, &a, &b, 3.0 * g.h, Some(&table));
        assert!((est.density - PI / 2.0).abs() < 1e-12);
        assert_eq!(est.matched, Some((1, PI / 2.0)));
    }

    #[test]
    fn bent_tube_splits_into_two_segments() {
        let g = Grid::ball(24, 1.0).unwrap();
        let a = Point::new(-0.6, 0.0, -0.5);
        let corner = Point::new(0.0, 0.0, 0.1);
        let b = Point::new(0.6, 0.0, -0.5);
        let m1 = tube_measure(&g, a, corner, 1.0, 1.2 * g.h);
        let m2 = tube_measure(&g, corner, b, 1.0, 1.2 * g.h);
        let density = m1.density.iter().zip(&m2.density).map(|(x, y)| x.max(*y)).collect();
        let m = EnergyMeasure { density, ..m1 };
        let ex = extract_singular_set(&m, &g, &ExtractOptions::default()).unwrap();
        assert!(ex.chain.edges.len() >= 2);
        let d = plateau_core::geometry::hausdorff_segments(&ex.chain.segments(), &[(a, corner), (corner, b)], 50);
        assert!(d <= 2.0 * g.h, "hausdorff {d}");
    }
}
