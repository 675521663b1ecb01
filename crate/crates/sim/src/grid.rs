//! Cartesian grids with a domain mask, and manifold-valued maps sampled on
//! them.

use std::sync::Arc;

use plateau_core::Point;
use rayon::prelude::*;
use thiserror::Error;

use crate::manifold::{ManifoldError, TargetManifold};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least {min} nodes per axis, got {got}")]
    TooSmall { min: usize, got: usize },
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("value at node {node} is {distance:e} away from the target")]
    OffManifoldValue { node: usize, distance: f64 },
    #[error("projection failed at node {node}: {source}")]
    Projection { node: usize, source: ManifoldError },
    #[error("ambient dimension mismatch: map has {map}, target has {target}")]
    DimensionMismatch { map: usize, target: usize },
    #[error("field dump: {0}")]
    Dump(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Inside,
    /// Carries fixed trace data.
    Boundary,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Ball of this radius centred at the origin.
    Ball { radius: f64 },
    /// The axis-aligned box spanned by the grid.
    Box,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dims: [usize; 3],
    pub h: f64,
    /// Position of node `(0, 0, 0)`.
    pub origin: Point,
    pub domain: Domain,
    kind: Vec<NodeKind>,
    cells: Vec<usize>,
}

impl Grid {
    /// Ball of radius `radius` on an `n³` grid centred at the origin, with
    /// one layer of boundary nodes around the inside nodes.
    pub fn ball(n: usize, radius: f64) -> Result<Self, GridError> {
        if n < 8 {
            return Err(GridError::TooSmall { min: 8, got: n });
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GridError::BadSpacing(radius));
        }
        let h = 2.0 * radius / (n - 3) as f64;
        let half = (n - 1) as f64 * h / 2.0;
        let origin = Point::new(-half, -half, -half);
        let dims = [n, n, n];
        let mut kind = vec![NodeKind::Outside; n * n * n];
        for (idx, k) in kind.iter_mut().enumerate() {
            let [i, j, l] = unravel(dims, idx);
            let x = origin + Point::new(i as f64, j as f64, l as f64) * h;
            if x.norm() < radius {
                *k = NodeKind::Inside;
            }
        }
        let mut boundary = Vec::new();
        for idx in 0..kind.len() {
            if kind[idx] != NodeKind::Inside {
                continue;
            }
            for nb in neighbours6(dims, idx).into_iter().flatten() {
                if kind[nb] == NodeKind::Outside {
                    boundary.push(nb);
                }
            }
        }
        for b in boundary {
            kind[b] = NodeKind::Boundary;
        }
        Ok(Self::finish(dims, h, origin, Domain::Ball { radius }, kind))
    }

    /// Box grid with `dims` nodes, spacing `h` and first node at `origin`;
    /// the outer faces are boundary nodes.
    pub fn cuboid(dims: [usize; 3], h: f64, origin: Point) -> Result<Self, GridError> {
        if let Some(&n) = dims.iter().find(|&&n| n < 3) {
            return Err(GridError::TooSmall { min: 3, got: n });
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(GridError::BadSpacing(h));
        }
        let kind = (0..dims[0] * dims[1] * dims[2])
            .map(|idx| {
                let c = unravel(dims, idx);
                if (0..3).any(|a| c[a] == 0 || c[a] == dims[a] - 1) {
                    NodeKind::Boundary
                } else {
                    NodeKind::Inside
                }
            })
            .collect();
        Ok(Self::finish(dims, h, origin, Domain::Box, kind))
    }

    fn finish(dims: [usize; 3], h: f64, origin: Point, domain: Domain, kind: Vec<NodeKind>) -> Self {
        let mut g = Self { dims, h, origin, domain, kind, cells: Vec::new() };
        g.cells = (0..g.node_count()).filter(|&i| g.cell_ok(i)).collect();
        g
    }

    fn cell_ok(&self, idx: usize) -> bool {
        let c = self.coords(idx);
        if (0..3).any(|a| c[a] + 1 >= self.dims[a]) {
            return false;
        }
        self.is_active(idx) && (0..3).all(|a| self.is_active(idx + self.stride(a)))
    }

    pub fn node_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Row-major: the last axis varies fastest.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        unravel(self.dims, idx)
    }

    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.dims[1] * self.dims[2],
            1 => self.dims[2],
            _ => 1,
        }
    }

    pub fn position(&self, idx: usize) -> Point {
        let [i, j, k] = self.coords(idx);
        self.origin + Point::new(i as f64, j as f64, k as f64) * self.h
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kind[idx]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kind
    }

    pub fn is_active(&self, idx: usize) -> bool {
        self.kind[idx] != NodeKind::Outside
    }

    /// Base nodes of the cells: active nodes whose `+x`, `+y`, `+z`
    /// neighbours are active too.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn is_cell(&self, idx: usize) -> bool {
        self.cells.binary_search(&idx).is_ok()
    }

    /// Centre of the cell based at `idx`.
    pub fn cell_center(&self, idx: usize) -> Point {
        self.position(idx) + Point::new(0.5, 0.5, 0.5) * self.h
    }

    pub fn neighbours(&self, idx: usize) -> [Option<usize>; 6] {
        neighbours6(self.dims, idx)
    }

    /// Nearest node to `x`, if `x` lies in the grid's bounding box.
    pub fn nearest_node(&self, x: &Point) -> Option<usize> {
        let rel = (x - self.origin) / self.h;
        let mut c = [0usize; 3];
        for a in 0..3 {
            let r = rel[a].round();
            if r < 0.0 || r > (self.dims[a] - 1) as f64 {
                return None;
            }
            c[a] = r as usize;
        }
        Some(self.index(c[0], c[1], c[2]))
    }

    /// Distance from `x` to the domain boundary (positive inside).
    pub fn depth(&self, x: &Point) -> f64 {
        match self.domain {
            Domain::Ball { radius } => radius - x.norm(),
            Domain::Box => {
                let lo = self.origin;
                let hi = self.origin
                    + Point::new(
                        (self.dims[0] - 1) as f64,
                        (self.dims[1] - 1) as f64,
                        (self.dims[2] - 1) as f64,
                    ) * self.h;
                (0..3).map(|a| (x[a] - lo[a]).min(hi[a] - x[a])).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Nodes with each kind.
    pub fn count(&self, kind: NodeKind) -> usize {
        self.kind.iter().filter(|&&k| k == kind).count()
    }
}

fn unravel(dims: [usize; 3], idx: usize) -> [usize; 3] {
    let k = idx % dims[2];
    let rest = idx / dims[2];
    [rest / dims[1], rest % dims[1], k]
}

fn neighbours6(dims: [usize; 3], idx: usize) -> [Option<usize>; 6] {
    let c = unravel(dims, idx);
    let strides = [dims[1] * dims[2], dims[2], 1];
    let mut out = [None; 6];
    for a in 0..3 {
        if c[a] > 0 {
            out[2 * a] = Some(idx - strides[a]);
        }
        if c[a] + 1 < dims[a] {
            out[2 * a + 1] = Some(idx + strides[a]);
        }
    }
    out
}

/// A map from the active grid nodes into an ambient ℝ^ν; outside nodes hold
/// NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub grid: Arc<Grid>,
    pub nu: usize,
    pub values: Vec<f64>,
}

impl GridMap {
    pub fn constant(grid: Arc<Grid>, value: &[f64]) -> Self {
        Self::from_fn(grid, value.len(), |_| value.to_vec())
    }

    /// Evaluate `f` at the position of every active node.
    pub fn from_fn(grid: Arc<Grid>, nu: usize, f: impl Fn(&Point) -> Vec<f64>) -> Self {
        let mut values = vec![f64::NAN; grid.node_count() * nu];
        for idx in 0..grid.node_count() {
            if grid.is_active(idx) {
                let v = f(&grid.position(idx));
                assert_eq!(v.len(), nu, "value dimension");
                values[idx * nu..(idx + 1) * nu].copy_from_slice(&v);
            }
        }
        Self { grid, nu, values }
    }

    pub fn value(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.nu..(idx + 1) * self.nu]
    }

    pub fn value_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.values[idx * self.nu..(idx + 1) * self.nu]
    }

    /// Largest distance of a stored value from the target, with the node.
    pub fn max_manifold_distance(&self, m: &dyn TargetManifold) -> Result<(usize, f64), GridError> {
        if m.ambient_dim() != self.nu {
            return Err(GridError::DimensionMismatch { map: self.nu, target: m.ambient_dim() });
        }
        let mut worst = (0, 0.0);
        let mut out = vec![0.0; self.nu];
        for idx in 0..self.grid.node_count() {
            if !self.grid.is_active(idx) {
                continue;
            }
            let v = self.value(idx);
            m.project(v, &mut out).map_err(|source| GridError::Projection { node: idx, source })?;
            let d = v.iter().zip(&out).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if d > worst.1 {
                worst = (idx, d);
            }
        }
        Ok(worst)
    }

    /// Error unless every value lies on the target within `tol`.
    pub fn check_on_manifold(&self, m: &dyn TargetManifold, tol: f64) -> Result<(), GridError> {
        let (node, distance) = self.max_manifold_distance(m)?;
        if distance > tol {
            return Err(GridError::OffManifoldValue { node, distance });
        }
        Ok(())
    }

    /// Project every inside node (boundary nodes are left alone).
    pub fn project_inside(&mut self, m: &dyn TargetManifold) -> Result<(), GridError> {
        let nu = self.nu;
        let grid = self.grid.clone();
        self.values
            .par_chunks_mut(nu)
            .enumerate()
            .try_for_each(|(idx, v)| {
                if grid.kind(idx) != NodeKind::Inside {
                    return Ok(());
                }
                let mut out = vec![0.0; nu];
                m.project(v, &mut out).map_err(|source| GridError::Projection { node: idx, source })?;
                v.copy_from_slice(&out);
                Ok(())
            })
    }

    /// Replace inside values by the componentwise discrete harmonic
    /// extension of the boundary values (conjugate gradients on the 7-point
    /// Laplacian).
    pub fn harmonic_extension(&mut self) {
        let grid = self.grid.clone();
        let inside: Vec<usize> = (0..grid.node_count()).filter(|&i| grid.kind(i) == NodeKind::Inside).collect();
        let mut slot = vec![usize::MAX; grid.node_count()];
        for (s, &i) in inside.iter().enumerate() {
            slot[i] = s;
        }
        let m = inside.len();
        if m == 0 {
            return;
        }
        for comp in 0..self.nu {
            // A x = b with A = 6I − adjacency among inside nodes.
            let mut b = vec![0.0; m];
            for (s, &i) in inside.iter().enumerate() {
                for nb in grid.neighbours(i).into_iter().flatten() {
                    if grid.kind(nb) == NodeKind::Boundary {
                        b[s] += self.values[nb * self.nu + comp];
                    }
                }
            }
            let apply = |x: &[f64], out: &mut [f64]| {
                out.par_iter_mut().enumerate().for_each(|(s, o)| {
                    let i = inside[s];
                    let mut acc = 6.0 * x[s];
                    for nb in grid.neighbours(i).into_iter().flatten() {
                        if slot[nb] != usize::MAX {
                            acc -= x[slot[nb]];
                        }
                    }
                    *o = acc;
                });
            };
            let mut x = vec![0.0; m];
            let mut r = b.clone();
            let mut d = r.clone();
            let mut ad = vec![0.0; m];
            let b_norm = dot(&b, &b).sqrt();
            let mut rr = dot(&r, &r);
            for _ in 0..10 * m {
                if rr.sqrt() <= 1e-13 * b_norm.max(1e-300) {
                    break;
                }
                apply(&d, &mut ad);
                let alpha = rr / dot(&d, &ad);
                for s in 0..m {
                    x[s] += alpha * d[s];
                    r[s] -= alpha * ad[s];
                }
                let rr_new = dot(&r, &r);
                let beta = rr_new / rr;
                for s in 0..m {
                    d[s] = r[s] + beta * d[s];
                }
                rr = rr_new;
            }
            for (s, &i) in inside.iter().enumerate() {
                self.values[i * self.nu + comp] = x[s];
            }
        }
    }

    /// Trilinear interpolation at `x`; `None` unless the 8 surrounding nodes
    /// are active.
    pub fn interpolate(&self, x: &Point) -> Option<Vec<f64>> {
        let g = &self.grid;
        let rel = (x - g.origin) / g.h;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let f = rel[a].floor();
            if f < 0.0 || f + 1.0 > (g.dims[a] - 1) as f64 {
                return None;
            }
            base[a] = f as usize;
            frac[a] = rel[a] - f;
        }
        let mut out = vec![0.0; self.nu];
        for corner in 0..8 {
            let off = [(corner >> 2) & 1, (corner >> 1) & 1, corner & 1];
            let idx = g.index(base[0] + off[0], base[1] + off[1], base[2] + off[2]);
            if !g.is_active(idx) {
                return None;
            }
            let w: f64 = (0..3).map(|a| if off[a] == 1 { frac[a] } else { 1.0 - frac[a] }).product();
            for (o, v) in out.iter_mut().zip(self.value(idx)) {
                *o += w * v;
            }
        }
        Some(out)
    }

    pub fn to_dump(&self) -> FieldDump {
        FieldDump { nu: self.nu, dims: self.grid.dims, h: self.grid.h, values: self.values.clone() }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Fixed chunking keeps the sum independent of the thread count.
    a.par_chunks(4096)
        .zip(b.par_chunks(4096))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Raw field file contents: header line `nu n1 n2 n3 h`, then the values as
/// little-endian f64, node-major in row-major node order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub nu: usize,
    pub dims: [usize; 3],
    pub h: f64,
    pub values: Vec<f64>,
}

/// Largest number of stored values a dump may declare.
pub const MAX_DUMP_VALUES: usize = 1 << 28;

impl FieldDump {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out =
            format!("{} {} {} {} {:?}\n", self.nu, self.dims[0], self.dims[1], self.dims[2], self.h).into_bytes();
        out.reserve(self.values.len() * 8);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, GridError> {
        let bad = |m: &str| GridError::Dump(m.to_string());
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header line"))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not UTF-8"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(bad("header needs `nu n1 n2 n3 h`"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| GridError::Dump(format!("bad integer {s:?}")));
        let nu = int(fields[0])?;
        let dims = [int(fields[1])?, int(fields[2])?, int(fields[3])?];
        let h: f64 = fields[4].parse().map_err(|_| bad("bad spacing"))?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(GridError::BadSpacing(h));
        }
        let count = [nu, dims[0], dims[1], dims[2]]
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&c| c > 0 && c <= MAX_DUMP_VALUES)
            .ok_or_else(|| bad("declared size is zero or too large"))?;
        let body = &bytes[nl + 1..];
        if body.len() != count * 8 {
            return Err(GridError::Dump(format!("expected {} data bytes, found {}", count * 8, body.len())));
        }
        let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { nu, dims, h, values })
    }
}
