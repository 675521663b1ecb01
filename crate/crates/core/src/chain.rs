//! Admissible chains: finite networks of straight segments carrying free
//! homotopy classes, attached to boundary defects.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::EnergyTable;
use crate::geometry::{affine_dimension, hull_distance, segment_distance, Point};
use crate::group::{ClassId, ClassSet, FiniteGroup};

/// Relative geometric tolerance; multiplied by the configuration diameter.
pub const GEO_RELATIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Boundary,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Solver,
    ExtractedFromSimulation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub pos: Point,
    pub kind: VertexKind,
}

/// Segment between two vertices; the class is read along `u → v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub class: ClassId,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chain {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub provenance: Option<Provenance>,
}

impl Chain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, pos: Point, kind: VertexKind) -> usize {
        self.vertices.push(Vertex { pos, kind });
        self.vertices.len() - 1
    }

    pub fn add_edge(&mut self, u: usize, v: usize, class: ClassId) -> usize {
        self.edges.push(Edge { u, v, class });
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edge_length(&self, e: &Edge) -> f64 {
        (self.vertices[e.v].pos - self.vertices[e.u].pos).norm()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| self.edge_length(e)).sum()
    }

    pub fn degree(&self, vertex: usize) -> usize {
        self.edges.iter().filter(|e| e.u == vertex || e.v == vertex).count()
    }

    /// Segments as point pairs.
    pub fn segments(&self) -> Vec<(Point, Point)> {
        self.edges
            .iter()
            .map(|e| (self.vertices[e.u].pos, self.vertices[e.v].pos))
            .collect()
    }

    pub fn diameter(&self) -> f64 {
        diameter(self.vertices.iter().map(|v| &v.pos))
    }

    /// Uniformly scale all vertex coordinates.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vertices {
            v.pos *= factor;
        }
        out
    }

    /// Apply a linear map (e.g. a rotation) to all vertices.
    pub fn transformed(&self, m: &nalgebra::Matrix3<f64>) -> Self {
        let mut out = self.clone();
        for v in &mut out.vertices {
            v.pos = m * v.pos;
        }
        out
    }

    /// Drop vertices that no edge touches and renumber.
    pub fn compacted(&self) -> Self {
        let mut map = vec![usize::MAX; self.vertices.len()];
        let mut out = Chain { provenance: self.provenance, ..Chain::default() };
        for e in &self.edges {
            for &x in &[e.u, e.v] {
                if map[x] == usize::MAX {
                    map[x] = out.add_vertex(self.vertices[x].pos, self.vertices[x].kind);
                }
            }
            out.add_edge(map[e.u], map[e.v], e.class);
        }
        out
    }
}

pub(crate) fn diameter<'a>(points: impl Iterator<Item = &'a Point> + Clone) -> f64 {
    let mut best: f64 = 0.0;
    for (i, a) in points.clone().enumerate() {
        for b in points.clone().skip(i + 1) {
            best = best.max((a - b).norm());
        }
    }
    best
}

/// One boundary defect: a point of the boundary and the class of the datum
/// on small loops around it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCharge {
    pub pos: Point,
    pub class: ClassId,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("boundary points {0} and {1} coincide")]
    Coincident(usize, usize),
    #[error("boundary point {0} carries the trivial class")]
    TrivialClass(usize),
    #[error("boundary point {index} has class {class}, group has {count} classes")]
    UnknownClass { index: usize, class: ClassId, count: usize },
}

/// Boundary defect configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundaryChargeSpec {
    pub charges: Vec<BoundaryCharge>,
}

impl BoundaryChargeSpec {
    pub fn new(charges: Vec<BoundaryCharge>) -> Result<Self, SpecError> {
        let points: Vec<Point> = charges.iter().map(|c| c.pos).collect();
        let tol = GEO_RELATIVE_TOL * diameter(points.iter()).max(1.0);
        for (i, a) in charges.iter().enumerate() {
            if a.class == 0 {
                return Err(SpecError::TrivialClass(i));
            }
            for (j, b) in charges.iter().enumerate().skip(i + 1) {
                if (a.pos - b.pos).norm() <= tol {
                    return Err(SpecError::Coincident(i, j));
                }
            }
        }
        Ok(Self { charges })
    }

    /// All points carry the same class.
    pub fn uniform(points: &[Point], class: ClassId) -> Result<Self, SpecError> {
        Self::new(points.iter().map(|&pos| BoundaryCharge { pos, class }).collect())
    }

    pub fn check_classes(&self, group: &FiniteGroup) -> Result<(), SpecError> {
        for (index, c) in self.charges.iter().enumerate() {
            if c.class >= group.class_count() {
                return Err(SpecError::UnknownClass { index, class: c.class, count: group.class_count() });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn points(&self) -> Vec<Point> {
        self.charges.iter().map(|c| c.pos).collect()
    }

    /// Index of the spec point within `tol` of `x`.
    pub fn locate(&self, x: &Point, tol: f64) -> Option<usize> {
        self.charges.iter().position(|c| (c.pos - x).norm() <= tol)
    }
}

/// One violated admissibility property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    VertexOutOfRange { edge: usize },
    DegenerateEdge { edge: usize },
    UnknownClass { edge: usize, class: ClassId },
    TrivialCharge { edge: usize },
    SegmentsIntersect { first: usize, second: usize },
    /// Interior vertex of degree 0 or 1: a segment ends inside the domain.
    InteriorEndpoint { vertex: usize, degree: usize },
    InteriorFlux { vertex: usize },
    /// A boundary vertex that is not one of the declared defects.
    UndeclaredBoundaryVertex { vertex: usize },
    BoundaryFlux { vertex: usize, expected: ClassId },
    /// A declared defect that no boundary vertex of the chain sits on.
    UncoveredDefect { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Flux was checked with the necessary product condition only
    /// (nonabelian fundamental group).
    pub necessary_only: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the admissibility properties and the flux conditions of `chain`
/// against the boundary defects in `spec`.
///
/// Flux convention: the edge `u → v` contributes its class at `u` and the
/// inverse class at `v`. At an interior vertex the contributions must
/// multiply to the identity; at a boundary vertex to the declared class. For
/// abelian groups this is exact. For nonabelian groups the check asks whether
/// *some* ordering and choice of representatives reaches the required class,
/// a necessary condition only.
pub fn validate_chain(chain: &Chain, spec: &BoundaryChargeSpec, group: &FiniteGroup) -> ValidationReport {
    let abelian = group.is_abelian();
    let mut violations = Vec::new();
    let n = chain.vertices.len();
    let diam = diameter(chain.vertices.iter().map(|v| &v.pos).chain(spec.charges.iter().map(|c| &c.pos)));
    let tol = GEO_RELATIVE_TOL * diam.max(f64::MIN_POSITIVE);

    let mut edge_ok = vec![true; chain.edges.len()];
    for (i, e) in chain.edges.iter().enumerate() {
        if e.u >= n || e.v >= n {
            violations.push(Violation::VertexOutOfRange { edge: i });
            edge_ok[i] = false;
            continue;
        }
        if e.u == e.v || chain.edge_length(e) <= tol {
            violations.push(Violation::DegenerateEdge { edge: i });
            edge_ok[i] = false;
        }
        if e.class >= group.class_count() {
            violations.push(Violation::UnknownClass { edge: i, class: e.class });
            edge_ok[i] = false;
        } else if e.class == 0 {
            violations.push(Violation::TrivialCharge { edge: i });
        }
    }

    // Open segments pairwise disjoint.
    for i in 0..chain.edges.len() {
        if !edge_ok[i] {
            continue;
        }
        for j in (i + 1)..chain.edges.len() {
            if !edge_ok[j] {
                continue;
            }
            if segments_overlap(chain, &chain.edges[i], &chain.edges[j], tol) {
                violations.push(Violation::SegmentsIntersect { first: i, second: j });
            }
        }
    }

    let count = group.class_count();
    for (vertex, vx) in chain.vertices.iter().enumerate() {
        let incident: Vec<ClassId> = chain
            .edges
            .iter()
            .enumerate()
            .filter(|(i, _)| edge_ok[*i])
            .filter_map(|(_, e)| {
                if e.u == vertex {
                    Some(e.class)
                } else if e.v == vertex {
                    Some(group.inverse_class(e.class))
                } else {
                    None
                }
            })
            .collect();
        let required = match vx.kind {
            VertexKind::Interior => {
                if incident.len() < 2 {
                    violations.push(Violation::InteriorEndpoint { vertex, degree: incident.len() });
                }
                0
            }
            VertexKind::Boundary => match spec.locate(&vx.pos, tol) {
                Some(k) => spec.charges[k].class,
                None => {
                    violations.push(Violation::UndeclaredBoundaryVertex { vertex });
                    continue;
                }
            },
        };
        if required >= count {
            continue;
        }
        let reachable = flux_product(group, &incident, abelian);
        if !reachable.contains(required) {
            violations.push(match vx.kind {
                VertexKind::Interior => Violation::InteriorFlux { vertex },
                VertexKind::Boundary => Violation::BoundaryFlux { vertex, expected: required },
            });
        }
    }

    for (index, c) in spec.charges.iter().enumerate() {
        let covered = chain
            .vertices
            .iter()
            .any(|v| v.kind == VertexKind::Boundary && (v.pos - c.pos).norm() <= tol);
        if !covered {
            violations.push(Violation::UncoveredDefect { index });
        }
    }

    ValidationReport { violations, necessary_only: !abelian }
}

fn flux_product(group: &FiniteGroup, incident: &[ClassId], abelian: bool) -> ClassSet {
    if abelian {
        // Classes are singletons; the product is a single element.
        let g = incident
            .iter()
            .fold(0, |acc, &c| group.mul(acc, group.representative(c)));
        ClassSet::single(group.class_count(), group.class_of(g))
    } else {
        group.class_product(incident)
    }
}

fn segments_overlap(chain: &Chain, a: &Edge, b: &Edge, tol: f64) -> bool {
    let shared: Vec<usize> = [a.u, a.v].into_iter().filter(|x| *x == b.u || *x == b.v).collect();
    let pa = (chain.vertices[a.u].pos, chain.vertices[a.v].pos);
    let pb = (chain.vertices[b.u].pos, chain.vertices[b.v].pos);
    match shared.len() {
        0 => segment_distance(&pa.0, &pa.1, &pb.0, &pb.1) <= tol,
        1 => {
            // Sharing one endpoint: they overlap only if they leave it in the
            // same direction.
            let w = shared[0];
            let other = |e: &Edge| if e.u == w { e.v } else { e.u };
            let origin = chain.vertices[w].pos;
            let da = chain.vertices[other(a)].pos - origin;
            let db = chain.vertices[other(b)].pos - origin;
            let (la, lb) = (da.norm(), db.norm());
            let short = la.min(lb);
            // The far endpoint of the shorter segment lies on the longer one.
            let (s, l) = if la <= lb { (da, db) } else { (db, da) };
            let t = s.dot(&l) / l.norm_squared();
            t > 0.0 && (s - l * t).norm() <= tol && short > tol
        }
        _ => true,
    }
}

/// Per-edge contribution to the mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMass {
    pub edge: usize,
    pub weight: f64,
    pub length: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub total_mass: f64,
    pub per_edge: Vec<EdgeMass>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("edge {edge} carries class {class} which the energy table does not cover")]
    UnknownClass { edge: usize, class: ClassId },
    #[error("energy table for p = {0} given, the mass needs p = 2")]
    WrongExponent(f64),
    #[error("boundary charge spec is empty")]
    EmptySpec,
}

/// `Σ E^sg₂(class) · length` over the edges.
pub fn chain_mass(chain: &Chain, table: &EnergyTable) -> Result<MassReport, ChainError> {
    if table.p != 2.0 {
        return Err(ChainError::WrongExponent(table.p));
    }
    let mut per_edge = Vec::with_capacity(chain.edges.len());
    for (i, e) in chain.edges.iter().enumerate() {
        let weight = table
            .energy(e.class)
            .filter(|w| w.is_finite())
            .ok_or(ChainError::UnknownClass { edge: i, class: e.class })?;
        let length = chain.edge_length(e);
        per_edge.push(EdgeMass { edge: i, weight, length, contribution: weight * length });
    }
    let total_mass = per_edge.iter().map(|e| e.contribution).sum();
    Ok(MassReport { total_mass, per_edge })
}

/// Norm of `Σ λᵢ vᵢ` at every interior vertex, with `vᵢ` the outgoing unit
/// directions and `λᵢ = E^sg₂` of the edge classes.
pub fn balance_residuals(chain: &Chain, table: &EnergyTable) -> Result<Vec<(usize, f64)>, ChainError> {
    let mut out = Vec::new();
    for (vertex, vx) in chain.vertices.iter().enumerate() {
        if vx.kind != VertexKind::Interior {
            continue;
        }
        let mut force = Point::zeros();
        for (i, e) in chain.edges.iter().enumerate() {
            let other = if e.u == vertex {
                e.v
            } else if e.v == vertex {
                e.u
            } else {
                continue;
            };
            let weight = table
                .energy(e.class)
                .filter(|w| w.is_finite())
                .ok_or(ChainError::UnknownClass { edge: i, class: e.class })?;
            let d = chain.vertices[other].pos - vx.pos;
            let len = d.norm();
            if len > 0.0 {
                force += d * (weight / len);
            }
        }
        out.push((vertex, force.norm()));
    }
    Ok(out)
}

/// Largest balance residual, `0` when there are no interior vertices.
pub fn max_balance_residual(chain: &Chain, table: &EnergyTable) -> Result<f64, ChainError> {
    Ok(balance_residuals(chain, table)?.into_iter().map(|(_, r)| r).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullReport {
    pub inside: bool,
    pub max_violation: f64,
    /// Affine dimension of the defect set when it is below 3.
    pub degenerate_dimension: Option<usize>,
}

/// Whether every chain vertex lies in the convex hull of the defect points.
pub fn convex_hull_containment(chain: &Chain, spec: &BoundaryChargeSpec) -> Result<HullReport, ChainError> {
    if spec.is_empty() {
        return Err(ChainError::EmptySpec);
    }
    let points = spec.points();
    let diam = diameter(points.iter()).max(chain.diameter());
    let tol = GEO_RELATIVE_TOL * diam.max(f64::MIN_POSITIVE);
    let dim = affine_dimension(&points, GEO_RELATIVE_TOL);
    let max_violation = chain
        .vertices
        .iter()
        .map(|v| hull_distance(&v.pos, &points))
        .fold(0.0, f64::max);
    Ok(HullReport {
        inside: max_violation <= tol,
        max_violation,
        degenerate_dimension: (dim < 3).then_some(dim),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{class_energy_table, rp2_systole, LengthSpectrum};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn z2_table() -> (FiniteGroup, EnergyTable) {
        let g = FiniteGroup::cyclic(2);
        let l = LengthSpectrum::new(&g, vec![0.0, rp2_systole()]).unwrap();
        let t = class_energy_table(&g, &l, 2.0).unwrap();
        (g, t)
    }

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    #[test]
    fn two_point_connection_is_valid() {
        let (g, _) = z2_table();
        let a = p(0.0, 0.0, -1.0);
        let b = p(0.0, 0.0, 1.0);
        let spec = BoundaryChargeSpec::uniform(&[a, b], 1).unwrap();
        let mut c = Chain::new();
        let u = c.add_vertex(a, VertexKind::Boundary);
        let v = c.add_vertex(b, VertexKind::Boundary);
        c.add_edge(u, v, 1);
        let r = validate_chain(&c, &spec, &g);
        assert!(r.is_valid(), "{:?}", r);
        assert!(!r.necessary_only);
    }

    #[test]
    fn z2_y_junction_violates_interior_flux() {
        let (g, _) = z2_table();
        let pts = [p(1.0, 0.0, 0.0), p(-0.5, 0.8, 0.0), p(-0.5, -0.8, 0.0)];
        let spec = BoundaryChargeSpec::uniform(&pts, 1).unwrap();
        let mut c = Chain::new();
        let s = c.add_vertex(Point::zeros(), VertexKind::Interior);
        for q in pts {
            let b = c.add_vertex(q, VertexKind::Boundary);
            c.add_edge(s, b, 1);
        }
        let r = validate_chain(&c, &spec, &g);
        assert_eq!(r.violations, vec![Violation::InteriorFlux { vertex: 0 }]);
    }

    #[test]
    fn klein_degree_four_vertex_balances() {
        let v4 = FiniteGroup::cyclic(2).direct_product(&FiniteGroup::cyclic(2));
        // Charges a, a, b, b sum to zero.
        let pts = [p(1.0, 0.0, 0.0), p(-1.0, 0.0, 0.0), p(0.0, 1.0, 0.0), p(0.0, -1.0, 0.0)];
        let classes = [1, 1, 2, 2];
        let spec = BoundaryChargeSpec::new(
            pts.iter().zip(classes).map(|(&pos, class)| BoundaryCharge { pos, class }).collect(),
        )
        .unwrap();
        let mut c = Chain::new();
        let s = c.add_vertex(Point::zeros(), VertexKind::Interior);
        for (q, cl) in pts.iter().zip(classes) {
            let b = c.add_vertex(*q, VertexKind::Boundary);
            c.add_edge(s, b, cl);
        }
        let r = validate_chain(&c, &spec, &v4);
        assert!(r.is_valid(), "{:?}", r);

        // Three different nonzero charges also sum to zero in the Klein group.
        let mut c2 = c.clone();
        c2.edges[3].class = 3;
        let r2 = validate_chain(&c2, &spec, &v4);
        assert!(r2.violations.contains(&Violation::InteriorFlux { vertex: 0 }));
    }

    #[test]
    fn dangling_and_crossing_detected() {
        let (g, _) = z2_table();
        let pts = [p(-1.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, -1.0, 0.0), p(0.0, 1.0, 0.0)];
        let spec = BoundaryChargeSpec::uniform(&pts, 1).unwrap();
        let mut c = Chain::new();
        let ids: Vec<usize> = pts.iter().map(|&q| c.add_vertex(q, VertexKind::Boundary)).collect();
        c.add_edge(ids[0], ids[1], 1);
        c.add_edge(ids[2], ids[3], 1);
        let r = validate_chain(&c, &spec, &g);
        assert_eq!(r.violations, vec![Violation::SegmentsIntersect { first: 0, second: 1 }]);

        let mut d = Chain::new();
        let a = d.add_vertex(pts[0], VertexKind::Boundary);
        let s = d.add_vertex(Point::zeros(), VertexKind::Interior);
        d.add_edge(a, s, 1);
        let r = validate_chain(&d, &BoundaryChargeSpec::uniform(&pts[..1], 1).unwrap(), &g);
        assert!(r.violations.contains(&Violation::InteriorEndpoint { vertex: 1, degree: 1 }));
    }

    #[test]
    fn uncovered_defect_and_trivial_charge() {
        let (g, _) = z2_table();
        let pts = [p(-1.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 2.0, 0.0)];
        let spec = BoundaryChargeSpec::uniform(&pts, 1).unwrap();
        let mut c = Chain::new();
        let a = c.add_vertex(pts[0], VertexKind::Boundary);
        let b = c.add_vertex(pts[1], VertexKind::Boundary);
        c.add_edge(a, b, 0);
        let r = validate_chain(&c, &spec, &g);
        assert!(r.violations.contains(&Violation::TrivialCharge { edge: 0 }));
        assert!(r.violations.contains(&Violation::UncoveredDefect { index: 2 }));
        assert!(r.violations.contains(&Violation::BoundaryFlux { vertex: 0, expected: 1 }));
    }

    #[test]
    fn collinear_overlap_is_an_intersection() {
        let (g, _) = z2_table();
        let mut c = Chain::new();
        let a = c.add_vertex(p(0.0, 0.0, 0.0), VertexKind::Boundary);
        let b = c.add_vertex(p(2.0, 0.0, 0.0), VertexKind::Boundary);
        let m = c.add_vertex(p(1.0, 0.0, 0.0), VertexKind::Interior);
        c.add_edge(a, b, 1);
        c.add_edge(a, m, 1);
        c.add_edge(m, b, 1);
        let spec = BoundaryChargeSpec::uniform(&[p(0.0, 0.0, 0.0), p(2.0, 0.0, 0.0)], 1).unwrap();
        let r = validate_chain(&c, &spec, &g);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::SegmentsIntersect { .. })));
    }

    #[test]
    fn nonabelian_flags_necessary_only() {
        let s3 = FiniteGroup::symmetric(3);
        // Element 1 is the transposition swapping the last two letters.
        let transpositions = s3.class_of(1);
        assert_eq!(s3.classes()[transpositions].len(), 3);
        let mut c = Chain::new();
        let a = c.add_vertex(p(0.0, 0.0, 0.0), VertexKind::Boundary);
        let b = c.add_vertex(p(1.0, 0.0, 0.0), VertexKind::Boundary);
        c.add_edge(a, b, transpositions);
        let spec = BoundaryChargeSpec::new(vec![
            BoundaryCharge { pos: p(0.0, 0.0, 0.0), class: transpositions },
            BoundaryCharge { pos: p(1.0, 0.0, 0.0), class: s3.inverse_class(transpositions) },
        ])
        .unwrap();
        let r = validate_chain(&c, &spec, &s3);
        assert!(r.necessary_only);
        assert!(r.is_valid(), "{:?}", r);
    }

    #[test]
    fn masses() {
        let (_, t) = z2_table();
        let mut c = Chain::new();
        let a = c.add_vertex(p(0.0, 0.0, -1.0), VertexKind::Boundary);
        let b = c.add_vertex(p(0.0, 0.0, 1.0), VertexKind::Boundary);
        c.add_edge(a, b, 1);
        assert_relative_eq!(chain_mass(&c, &t).unwrap().total_mass, PI, max_relative = 1e-14);
        assert_eq!(chain_mass(&Chain::new(), &t).unwrap().total_mass, 0.0);

        let mut d = Chain::new();
        let x = d.add_vertex(p(0.0, 0.0, 0.0), VertexKind::Boundary);
        let y = d.add_vertex(p(1.0, 0.0, 0.0), VertexKind::Boundary);
        let z = d.add_vertex(p(5.0, 0.0, 0.0), VertexKind::Boundary);
        let w = d.add_vertex(p(5.0, 1.0, 0.0), VertexKind::Boundary);
        d.add_edge(x, y, 1);
        d.add_edge(z, w, 1);
        let m = chain_mass(&d, &t).unwrap();
        assert_relative_eq!(m.total_mass, PI, max_relative = 1e-14);
        assert_eq!(m.per_edge.len(), 2);

        let mut bad = d.clone();
        bad.edges[0].class = 5;
        assert!(matches!(chain_mass(&bad, &t), Err(ChainError::UnknownClass { edge: 0, class: 5 })));
    }

    #[test]
    fn balance_of_simple_vertices() {
        let (_, t) = z2_table();
        let lambda = PI / 2.0;
        // Straight degree-2 vertex.
        let mut c = Chain::new();
        let a = c.add_vertex(p(0.0, 0.0, 0.0), VertexKind::Boundary);
        let m = c.add_vertex(p(0.3, 0.0, 0.0), VertexKind::Interior);
        let b = c.add_vertex(p(1.0, 0.0, 0.0), VertexKind::Boundary);
        c.add_edge(a, m, 1);
        c.add_edge(m, b, 1);
        assert!(max_balance_residual(&c, &t).unwrap() < 1e-15);
        // 90 degree bend.
        c.vertices[b].pos = p(0.3, 1.0, 0.0);
        assert_relative_eq!(max_balance_residual(&c, &t).unwrap(), lambda * 2f64.sqrt(), max_relative = 1e-14);
        // Fermat point of an equilateral triangle.
        let mut f = Chain::new();
        let s = f.add_vertex(Point::zeros(), VertexKind::Interior);
        for k in 0..3 {
            let th = 2.0 * PI * k as f64 / 3.0;
            let q = f.add_vertex(p(th.cos(), th.sin(), 0.0), VertexKind::Boundary);
            f.add_edge(s, q, 1);
        }
        assert!(max_balance_residual(&f, &t).unwrap() <= 1e-9);
    }

    #[test]
    fn hull_checks() {
        let pts = [p(1.0, 0.0, 0.0), p(-1.0, 0.0, 0.0), p(0.0, 1.0, 0.0), p(0.0, -1.0, 0.0)];
        let spec = BoundaryChargeSpec::uniform(&pts, 1).unwrap();
        let mut c = Chain::new();
        let a = c.add_vertex(pts[0], VertexKind::Boundary);
        let b = c.add_vertex(pts[2], VertexKind::Boundary);
        c.add_edge(a, b, 1);
        let r = convex_hull_containment(&c, &spec).unwrap();
        assert!(r.inside);
        assert_eq!(r.degenerate_dimension, Some(2));

        let s = c.add_vertex(p(0.0, 0.0, 0.1), VertexKind::Interior);
        c.add_edge(s, a, 1);
        let r = convex_hull_containment(&c, &spec).unwrap();
        assert!(!r.inside);
        assert_relative_eq!(r.max_violation, 0.1, epsilon = 1e-12);

        assert!(matches!(convex_hull_containment(&c, &BoundaryChargeSpec::default()), Err(ChainError::EmptySpec)));
    }

    #[test]
    fn spec_rejects_coincident_points() {
        let q = p(1.0, 0.0, 0.0);
        assert_eq!(BoundaryChargeSpec::uniform(&[q, q], 1).unwrap_err(), SpecError::Coincident(0, 1));
        assert_eq!(BoundaryChargeSpec::uniform(&[q], 0).unwrap_err(), SpecError::TrivialClass(0));
    }
}
