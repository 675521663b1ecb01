//! Boundary data on the ball: the two-defect and four-defect RP² maps, a
//! smooth map, the W^{1/2,2} seminorm and the global energy bound ratio.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use plateau_core::chain::SpecError;
use plateau_core::{BoundaryCharge, BoundaryChargeSpec, ClassId, Point};
use rayon::prelude::*;
use thiserror::Error;

use crate::energy::p_energy;
use crate::grid::{Domain, Grid, GridMap, NodeKind};
use crate::manifold::{ManifoldError, RealProjectivePlane, TargetManifold};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundaryError {
    #[error("defect point {0:?} is not on the sphere")]
    PointsNotOnBoundary(Point),
    #[error("boundary data need a ball grid")]
    NotSpherical,
    #[error("defect {index}: declared class {declared}, loop gives {found}")]
    ChargeMismatch { index: usize, declared: ClassId, found: ClassId },
    #[error("loop around defect {index}: {source}")]
    Loop { index: usize, source: ManifoldError },
    #[error("boundary seminorm vanishes but the energy is {0}")]
    SeminormZero(f64),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// Boundary datum on the unit sphere, extended 0-homogeneously.
#[derive(Debug, Clone, PartialEq)]
pub enum Datum {
    /// Half-angle director around two defects `a`, `b` (unit vectors).
    Pair { a: Point, b: Point },
    /// Four defects at (±1,0,0), (0,±1,0).
    FourPoint,
    /// Director `(cos βy₃, sin βy₃, 0)`.
    Smooth { beta: f64 },
    /// Constant director.
    Constant { director: Vector3<f64> },
}

fn frame(b: &Point) -> (Point, Point) {
    let helper = if b.x.abs() < 0.9 { Point::x() } else { Point::y() };
    let e1 = (helper - b * helper.dot(b)).normalize();
    (e1, b.cross(&e1))
}

impl Datum {
    /// Director at the unit vector `y`.
    pub fn director(&self, y: &Point) -> Vector3<f64> {
        match self {
            Datum::Pair { a, b } => {
                let (e1, e2) = frame(b);
                let stereo = |y: &Point| {
                    let den = (1.0 - y.dot(b)).max(1e-300);
                    (y.dot(&e1) / den, y.dot(&e2) / den)
                };
                let (wx, wy) = stereo(y);
                let (ax, ay) = stereo(a);
                let psi = (wy - ay).atan2(wx - ax);
                e1 * (psi / 2.0).cos() + e2 * (psi / 2.0).sin()
            }
            Datum::FourPoint => {
                let den = ((y.x * y.x + y.z * y.z) * (y.y * y.y + y.z * y.z)).sqrt();
                let theta = if den > 0.0 { (y.z / den).atan2(y.x * y.y / den) } else { 0.0 };
                Vector3::new(0.0, (theta / 2.0).cos(), (theta / 2.0).sin())
            }
            Datum::Smooth { beta } => Vector3::new((beta * y.z).cos(), (beta * y.z).sin(), 0.0),
            Datum::Constant { director } => *director,
        }
    }

    /// Ambient RP² value at `x` (0-homogeneous; the origin uses a fixed
    /// direction).
    pub fn value(&self, x: &Point) -> Vec<f64> {
        let r = x.norm();
        let y = if r > 1e-12 { x / r } else { Point::new(0.267, 0.534, 0.802).normalize() };
        RealProjectivePlane::from_director(&self.director(&y)).to_vec()
    }

    /// Defect directions with their classes.
    pub fn defects(&self) -> Vec<(Point, ClassId)> {
        match self {
            Datum::Pair { a, b } => vec![(*a, 1), (*b, 1)],
            Datum::FourPoint => {
                vec![(Point::x(), 1), (-Point::x(), 1), (Point::y(), 1), (-Point::y(), 1)]
            }
            _ => Vec::new(),
        }
    }
}

/// Class of the datum on the circle of angular radius `radius` around the
/// unit vector `center`.
pub fn sphere_loop_class(datum: &Datum, center: &Point, radius: f64) -> Result<ClassId, ManifoldError> {
    let (e1, e2) = frame(center);
    let samples = 512;
    let pts: Vec<Vec<f64>> = (0..samples)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / samples as f64;
            let y = center * radius.cos() + (e1 * t.cos() + e2 * t.sin()) * radius.sin();
            datum.value(&y)
        })
        .collect();
    RealProjectivePlane.loop_class(&pts)
}

/// A datum sampled on a ball grid, with its declared defects.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    pub datum: Datum,
    /// Datum at every active node: exact on the boundary, the radial
    /// extension inside.
    pub map: GridMap,
    pub spec: BoundaryChargeSpec,
}

fn ball_radius(grid: &Grid) -> Result<f64, BoundaryError> {
    match grid.domain {
        Domain::Ball { radius } => Ok(radius),
        Domain::Box => Err(BoundaryError::NotSpherical),
    }
}

impl BoundaryField {
    pub fn new(datum: Datum, grid: Arc<Grid>) -> Result<Self, BoundaryError> {
        let radius = ball_radius(&grid)?;
        let spec = BoundaryChargeSpec::new(
            datum.defects().into_iter().map(|(y, class)| BoundaryCharge { pos: y * radius, class }).collect(),
        )?;
        let map = GridMap::from_fn(grid, 5, |x| datum.value(x));
        let field = Self { datum, map, spec };
        field.verify_charges()?;
        Ok(field)
    }

    /// Detect the class on a small loop around every declared defect.
    pub fn verify_charges(&self) -> Result<(), BoundaryError> {
        let dirs: Vec<Point> = self.spec.charges.iter().map(|c| c.pos.normalize()).collect();
        let mut sep = PI;
        for (i, a) in dirs.iter().enumerate() {
            for b in &dirs[i + 1..] {
                sep = sep.min(a.dot(b).clamp(-1.0, 1.0).acos());
            }
        }
        let radius = (sep / 4.0).min(0.2);
        for (index, (c, y)) in self.spec.charges.iter().zip(&dirs).enumerate() {
            let found = sphere_loop_class(&self.datum, y, radius).map_err(|source| BoundaryError::Loop { index, source })?;
            if found != c.class {
                return Err(BoundaryError::ChargeMismatch { index, declared: c.class, found });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.map.grid
    }

    /// Starting map for the minimizer: the harmonic extension of the
    /// boundary values, projected, with the radial value wherever the
    /// projection is undefined.
    pub fn harmonic_start(&self) -> GridMap {
        let mut u = self.map.clone();
        u.harmonic_extension();
        let m = RealProjectivePlane;
        let mut out = [0.0; 5];
        for idx in 0..u.grid.node_count() {
            if u.grid.kind(idx) != NodeKind::Inside {
                continue;
            }
            match m.project(u.value(idx), &mut out) {
                Ok(()) => u.value_mut(idx).copy_from_slice(&out),
                Err(_) => u.value_mut(idx).copy_from_slice(self.map.value(idx)),
            }
        }
        u
    }
}

/// Two defects at `a`, `b` on the sphere (within one spacing of the radius).
pub fn rp2_pair_datum(a: &Point, b: &Point, grid: Arc<Grid>) -> Result<BoundaryField, BoundaryError> {
    let radius = ball_radius(&grid)?;
    for x in [a, b] {
        if (x.norm() - radius).abs() > grid.h {
            return Err(BoundaryError::PointsNotOnBoundary(*x));
        }
    }
    BoundaryField::new(Datum::Pair { a: a.normalize(), b: b.normalize() }, grid)
}

pub fn four_point_datum(grid: Arc<Grid>) -> Result<BoundaryField, BoundaryError> {
    BoundaryField::new(Datum::FourPoint, grid)
}

pub fn smooth_datum(beta: f64, grid: Arc<Grid>) -> Result<BoundaryField, BoundaryError> {
    BoundaryField::new(Datum::Smooth { beta }, grid)
}

/// Rotate RP² values: `Q ↦ R Q Rᵀ` at every finite node.
pub fn rotate_values(map: &GridMap, r: &Matrix3<f64>) -> GridMap {
    let mut out = map.clone();
    for v in out.values.chunks_mut(5) {
        if v[0].is_finite() {
            let q = RealProjectivePlane::to_matrix(v);
            RealProjectivePlane::from_matrix(&(r * q * r.transpose()), v);
        }
    }
    out
}

/// Boundary nodes with radially projected positions and area weights from
/// a Fibonacci point set on the sphere.
pub fn boundary_quadrature(grid: &Grid) -> Result<Vec<(usize, Point, f64)>, BoundaryError> {
    let radius = ball_radius(grid)?;
    let nodes: Vec<usize> = (0..grid.node_count()).filter(|&i| grid.kind(i) == NodeKind::Boundary).collect();
    let dirs: Vec<Point> = nodes.iter().map(|&i| grid.position(i).normalize()).collect();
    let samples = (20 * nodes.len()).max(20_000);
    let golden = PI * (3.0 - 5f64.sqrt());
    let counts = (0..samples)
        .into_par_iter()
        .fold(
            || vec![0usize; nodes.len()],
            |mut acc, k| {
                let z = 1.0 - (2 * k + 1) as f64 / samples as f64;
                let s = (1.0 - z * z).sqrt();
                let phi = golden * k as f64;
                let y = Point::new(s * phi.cos(), s * phi.sin(), z);
                let best = (0..dirs.len()).max_by(|&i, &j| dirs[i].dot(&y).total_cmp(&dirs[j].dot(&y))).unwrap();
                acc[best] += 1;
                acc
            },
        )
        .reduce(
            || vec![0usize; nodes.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let area = 4.0 * PI * radius * radius / samples as f64;
    Ok(nodes
        .iter()
        .zip(&dirs)
        .zip(counts)
        .map(|((&i, d), c)| (i, d * radius, c as f64 * area))
        .collect())
}

/// `∬ |g(x) − g(y)|^q / |x − y|^{2 + s q}` over the sphere, as a midpoint
/// double sum over boundary nodes without the diagonal; distances are
/// floored at `h/2`.
pub fn fractional_seminorm(map: &GridMap, s: f64, q: f64) -> Result<f64, BoundaryError> {
    let quad = boundary_quadrature(&map.grid)?;
    let floor = map.grid.h / 2.0;
    let rows: Vec<f64> = (0..quad.len())
        .into_par_iter()
        .map(|i| {
            let (ni, xi, wi) = quad[i];
            let gi = map.value(ni);
            let mut row = 0.0;
            for (j, &(nj, xj, wj)) in quad.iter().enumerate() {
                if i == j || wj == 0.0 {
                    continue;
                }
                let diff = gi.iter().zip(map.value(nj)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if diff == 0.0 {
                    continue;
                }
                let dist = (xi - xj).norm().max(floor);
                row += wj * diff.powf(q) / dist.powf(2.0 + s * q);
            }
            wi * row
        })
        .collect();
    Ok(rows.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRatio {
    pub ratio: f64,
    pub energy: f64,
    pub seminorm: f64,
    /// Set when both numerator and denominator vanish.
    pub degenerate: bool,
}

/// `(2 − p) E_p(u) / |g|²` with the W^{1/2,2} seminorm of the boundary data.
pub fn energy_bound_ratio(g: &BoundaryField, u: &GridMap, p: f64) -> Result<BoundRatio, BoundaryError> {
    let energy = p_energy(u, p);
    let seminorm = fractional_seminorm(&g.map, 0.5, 2.0)?;
    if seminorm == 0.0 {
        if energy > 1e-12 {
            return Err(BoundaryError::SeminormZero(energy));
        }
        return Ok(BoundRatio { ratio: 0.0, energy, seminorm, degenerate: true });
    }
    Ok(BoundRatio { ratio: (2.0 - p) * energy / seminorm, energy, seminorm, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn ball(n: usize) -> Arc<Grid> {
        Arc::new(Grid::ball(n, 1.0).unwrap())
    }

    #[test]
    fn pair_datum_loops() {
        let d = Datum::Pair { a: -Point::z(), b: Point::z() };
        assert_eq!(sphere_loop_class(&d, &-Point::z(), 0.3).unwrap(), 1);
        assert_eq!(sphere_loop_class(&d, &Point::z(), 0.3).unwrap(), 1);
        // The equator encircles the axis.
        assert_eq!(sphere_loop_class(&d, &Point::z(), PI / 2.0).unwrap(), 1);
        assert_eq!(sphere_loop_class(&d, &Point::x(), 0.3).unwrap(), 0);
    }

    #[test]
    fn pair_datum_requires_sphere_points() {
        let g = ball(12);
        assert!(matches!(
            rp2_pair_datum(&Point::new(0.0, 0.0, 0.5), &Point::z(), g.clone()),
            Err(BoundaryError::PointsNotOnBoundary(_))
        ));
        let f = rp2_pair_datum(&-Point::z(), &Point::z(), g).unwrap();
        assert_eq!(f.spec.len(), 2);
        f.map.check_on_manifold(&RealProjectivePlane, 1e-12).unwrap();
    }

    #[test]
    fn four_point_datum_values() {
        let d = Datum::FourPoint;
        let top = d.director(&Point::z());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((top - Vector3::new(0.0, s, s)).norm() < 1e-12);
        for y in [Point::new(0.3, -0.5, 0.81), Point::new(0.9, 0.1, -0.42), Point::new(-0.2, 0.7, 0.1)] {
            let y = y.normalize();
            let swapped = Point::new(y.y, y.x, y.z);
            let a = d.value(&y);
            let b = d.value(&swapped);
            let r: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(r <= 1e-9);
        }
        for c in [Point::x(), -Point::x(), Point::y(), -Point::y()] {
            assert_eq!(sphere_loop_class(&d, &c, 0.2).unwrap(), 1);
        }
        assert_eq!(sphere_loop_class(&d, &Point::z(), 0.2).unwrap(), 0);
        let f = four_point_datum(ball(12)).unwrap();
        assert_eq!(f.spec.len(), 4);
    }

    #[test]
    fn constant_datum_has_zero_seminorm() {
        let f = BoundaryField::new(Datum::Constant { director: Vector3::z() }, ball(12)).unwrap();
        assert_eq!(fractional_seminorm(&f.map, 0.5, 2.0).unwrap(), 0.0);
        let r = energy_bound_ratio(&f, &f.map, 1.8).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.ratio, 0.0);
    }

    #[test]
    fn seminorm_is_invariant_under_target_isometries() {
        let f = rp2_pair_datum(&-Point::z(), &Point::z(), ball(12)).unwrap();
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 0.7).into_inner();
        let a = fractional_seminorm(&f.map, 0.5, 2.0).unwrap();
        let b = fractional_seminorm(&rotate_values(&f.map, &rot), 0.5, 2.0).unwrap();
        assert!(a > 0.0);
        assert!((a - b).abs() <= 1e-9 * a);
    }

    #[test]
    fn quadrature_weights_cover_the_sphere() {
        let g = ball(16);
        let q = boundary_quadrature(&g).unwrap();
        let total: f64 = q.iter().map(|x| x.2).sum();
        assert!((total - 4.0 * PI).abs() < 1e-9);
    }
}
