//! Mass-minimizing charged segment networks for a boundary defect
//! configuration.
//!
//! Three pieces: an exact branch-and-bound over perfect matchings for the
//! `ℤ/2ℤ` case, an enumerator of reduced network topologies with up to three
//! Steiner vertices, and a position optimizer that moves the Steiner
//! vertices to a zero of the balance force `Σ λᵢ vᵢ`.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{
    chain_mass, max_balance_residual, validate_chain, BoundaryChargeSpec, Chain, ChainError, Provenance,
    Vertex, VertexKind, Violation, GEO_RELATIVE_TOL,
};
use crate::energy::{EnergyError, EnergyTable, LengthSpectrum, ResolutionSearch};
use crate::geometry::{segment_distance, Point};
use crate::group::{ClassId, FiniteGroup};

/// Relative tolerance under which two masses count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlateauError {
    #[error("a perfect matching needs an even number of points, got {0}")]
    OddPointCount(usize),
    #[error("every optimal matching has crossing segments")]
    IntersectingOptimum,
    #[error("{what} = {value} exceeds the cap {cap}")]
    CapExceeded { what: &'static str, value: usize, cap: usize },
    #[error("segment weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("position optimizer hit {iterations} iterations (balance {balance:e})")]
    MaxIterations { iterations: usize, balance: f64, chain: Box<Chain> },
    #[error("no flux-feasible topology for this configuration")]
    NoFeasibleTopology,
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("invalid spec: {0}")]
    Spec(String),
}

/// A solved configuration: the optimal chain plus what came close.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub best: Chain,
    pub mass: f64,
    pub runner_ups: Vec<(Chain, f64)>,
    pub balance_max: f64,
    pub iterations: usize,
    /// Co-optimal chains (including `best`) within the tie tolerance.
    pub ties: Vec<Chain>,
    /// The best chain has intersecting open segments.
    pub crossing: bool,
}

impl SolveReport {
    fn empty() -> Self {
        Self {
            best: Chain { provenance: Some(Provenance::Solver), ..Chain::default() },
            mass: 0.0,
            runner_ups: Vec::new(),
            balance_max: 0.0,
            iterations: 0,
            ties: vec![Chain { provenance: Some(Provenance::Solver), ..Chain::default() }],
            crossing: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingOptions {
    /// Largest number of pairs solved exactly.
    pub max_pairs: usize,
    /// How many non-tied runner-ups to keep.
    pub runner_ups: usize,
    /// When every optimum crosses, return the best non-crossing matching
    /// instead of failing.
    pub prefer_non_crossing: bool,
}

impl Default for MatchingOptions {
    fn default() -> Self {
        Self { max_pairs: 10, runner_ups: 3, prefer_non_crossing: false }
    }
}

/// Minimal connection for `ℤ/2ℤ` charges: the perfect matching by segments
/// of least total length, weighted by `weight`.
pub fn minimal_connection_matching(
    points: &[Point],
    weight: f64,
    class: ClassId,
    opts: &MatchingOptions,
) -> Result<SolveReport, PlateauError> {
    if points.len() % 2 == 1 {
        return Err(PlateauError::OddPointCount(points.len()));
    }
    if !(weight > 0.0) {
        return Err(PlateauError::NonPositiveWeight(weight));
    }
    if points.len() / 2 > opts.max_pairs {
        return Err(PlateauError::CapExceeded { what: "pairs", value: points.len() / 2, cap: opts.max_pairs });
    }
    if points.is_empty() {
        return Ok(SolveReport::empty());
    }
    let n = points.len();
    let dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (points[i] - points[j]).norm()).collect()).collect();
    let mut search = MatchingSearch {
        dist: &dist,
        keep: opts.runner_ups + 1,
        found: Vec::new(),
        nodes: 0,
    };
    let mut pairs = Vec::with_capacity(n / 2);
    search.recurse(&mut vec![false; n], &mut pairs, 0.0);
    let nodes = search.nodes;
    let mut found = search.found;
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let to_chain = |pairs: &[(usize, usize)]| {
        let mut c = Chain { provenance: Some(Provenance::Solver), ..Chain::default() };
        for &(i, j) in pairs {
            let u = c.add_vertex(points[i], VertexKind::Boundary);
            let v = c.add_vertex(points[j], VertexKind::Boundary);
            c.add_edge(u, v, class);
        }
        c
    };
    let tol = GEO_RELATIVE_TOL * crate::chain::diameter(points.iter());
    let crosses = |pairs: &[(usize, usize)]| {
        pairs.iter().enumerate().any(|(a, &(i, j))| {
            pairs[a + 1..]
                .iter()
                .any(|&(k, l)| segment_distance(&points[i], &points[j], &points[k], &points[l]) <= tol)
        })
    };

    let best_len = found[0].0;
    let limit = best_len * (1.0 + TIE_TOLERANCE);
    let (tied, rest): (Vec<_>, Vec<_>) = found.into_iter().partition(|(len, _)| *len <= limit);
    let clean: Vec<&(f64, Vec<(usize, usize)>)> = tied.iter().filter(|(_, m)| !crosses(m)).collect();
    let (best_pairs, crossing) = if clean.is_empty() {
        if !opts.prefer_non_crossing {
            return Err(PlateauError::IntersectingOptimum);
        }
        match rest.iter().find(|(_, m)| !crosses(m)) {
            Some((_, m)) => (m.clone(), false),
            None => (tied[0].1.clone(), true),
        }
    } else {
        (clean[0].1.clone(), false)
    };
    let best = to_chain(&best_pairs);
    let mass = weight * pairs_length(&dist, &best_pairs);
    Ok(SolveReport {
        mass,
        runner_ups: rest
            .iter()
            .take(opts.runner_ups)
            .map(|(len, m)| (to_chain(m), weight * len))
            .collect(),
        balance_max: 0.0,
        iterations: nodes,
        ties: tied.iter().map(|(_, m)| to_chain(m)).collect(),
        crossing,
        best,
    })
}

fn pairs_length(dist: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(i, j)| dist[i][j]).sum()
}

struct MatchingSearch<'a> {
    dist: &'a [Vec<f64>],
    keep: usize,
    /// Best complete matchings found so far, unsorted.
    found: Vec<(f64, Vec<(usize, usize)>)>,
    nodes: usize,
}

impl MatchingSearch<'_> {
    /// Bound above which a partial matching cannot enter the kept set.
    fn cutoff(&self) -> f64 {
        if self.found.is_empty() {
            return f64::INFINITY;
        }
        let best = self.found.iter().map(|f| f.0).fold(f64::INFINITY, f64::min);
        let tie = best * (1.0 + TIE_TOLERANCE);
        let non_tied = self.found.iter().filter(|f| f.0 > tie).count();
        if non_tied < self.keep {
            return f64::INFINITY;
        }
        let mut lens: Vec<f64> = self.found.iter().filter(|f| f.0 > tie).map(|f| f.0).collect();
        lens.sort_by(f64::total_cmp);
        lens[self.keep - 1].max(tie)
    }

    fn lower_bound(&self, used: &[bool]) -> f64 {
        // Half the distance to the nearest free partner, summed over free points.
        let free: Vec<usize> = (0..used.len()).filter(|&i| !used[i]).collect();
        free.iter()
            .map(|&i| {
                free.iter()
                    .filter(|&&j| j != i)
                    .map(|&j| self.dist[i][j])
                    .fold(f64::INFINITY, f64::min)
                    * 0.5
            })
            .sum::<f64>()
    }

    fn recurse(&mut self, used: &mut Vec<bool>, pairs: &mut Vec<(usize, usize)>, partial: f64) {
        self.nodes += 1;
        let Some(i) = used.iter().position(|&u| !u) else {
            self.found.push((partial, pairs.clone()));
            let cut = self.cutoff();
            if cut.is_finite() {
                self.found.retain(|f| f.0 <= cut);
            }
            return;
        };
        if partial + self.lower_bound(used) > self.cutoff() * (1.0 + 1e-12) {
            return;
        }
        used[i] = true;
        let mut partners: Vec<usize> = (i + 1..used.len()).filter(|&j| !used[j]).collect();
        partners.sort_by(|&a, &b| self.dist[i][a].total_cmp(&self.dist[i][b]));
        for j in partners {
            used[j] = true;
            pairs.push((i, j));
            self.recurse(used, pairs, partial + self.dist[i][j]);
            pairs.pop();
            used[j] = false;
        }
        used[i] = false;
    }
}

/// Abstract network: vertices `0..boundary.len()` sit on the spec points in
/// order, vertices after that are Steiner (interior) vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    pub boundary: usize,
    pub steiner: usize,
    pub edges: Vec<(usize, usize, ClassId)>,
}

impl Topology {
    pub fn vertex_count(&self) -> usize {
        self.boundary + self.steiner
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.0 == v || e.1 == v).count()
    }

    /// Chain with boundary vertices at the spec points and Steiner vertices at
    /// neighbour averages.
    pub fn initial_chain(&self, spec: &BoundaryChargeSpec) -> Chain {
        let mut chain = Chain { provenance: Some(Provenance::Solver), ..Chain::default() };
        for c in &spec.charges {
            chain.add_vertex(c.pos, VertexKind::Boundary);
        }
        let centroid = if spec.is_empty() {
            Point::zeros()
        } else {
            spec.charges.iter().map(|c| c.pos).sum::<Point>() / spec.len() as f64
        };
        for _ in 0..self.steiner {
            chain.add_vertex(centroid, VertexKind::Interior);
        }
        for &(u, v, c) in &self.edges {
            chain.add_edge(u, v, c);
        }
        // Jacobi smoothing separates Steiner vertices that share the centroid.
        for _ in 0..50 {
            let mut next = chain.vertices.clone();
            for s in self.boundary..self.vertex_count() {
                let neigh: Vec<Point> = self
                    .edges
                    .iter()
                    .filter_map(|&(u, v, _)| {
                        if u == s {
                            Some(chain.vertices[v].pos)
                        } else if v == s {
                            Some(chain.vertices[u].pos)
                        } else {
                            None
                        }
                    })
                    .collect();
                if !neigh.is_empty() {
                    next[s].pos = neigh.iter().sum::<Point>() / neigh.len() as f64;
                }
            }
            chain.vertices = next;
        }
        chain
    }
}

/// Caps for [`enumerate_topologies`].
pub const MAX_STEINER: usize = 3;
pub const MAX_SPEC_POINTS: usize = 10;

/// Flux-feasible reduced topologies for the defects in `spec`.
///
/// A reduced topology is a forest in which every component is either a
/// single segment between two defects or a tree whose leaves are exactly its
/// defects and whose internal vertices are Steiner vertices of degree at
/// least three. Charges are then determined by the defect classes for abelian
/// groups; for nonabelian groups every charge assignment passing the
/// necessary flux condition is kept. Steiner vertices are unlabeled, so the
/// list contains one representative per isomorphism class fixing the
/// defects. The order is deterministic.
pub fn enumerate_topologies(
    spec: &BoundaryChargeSpec,
    group: &FiniteGroup,
    max_steiner: usize,
) -> Result<Vec<Topology>, PlateauError> {
    if max_steiner > MAX_STEINER {
        return Err(PlateauError::CapExceeded { what: "max_steiner", value: max_steiner, cap: MAX_STEINER });
    }
    if spec.len() > MAX_SPEC_POINTS {
        return Err(PlateauError::CapExceeded { what: "spec points", value: spec.len(), cap: MAX_SPEC_POINTS });
    }
    spec.check_classes(group).map_err(|e| PlateauError::Spec(e.to_string()))?;
    let b = spec.len();
    let classes: Vec<ClassId> = spec.charges.iter().map(|c| c.class).collect();
    let shapes = tree_shapes(max_steiner);

    let mut out: Vec<Topology> = Vec::new();
    let mut seen: HashSet<Topology> = HashSet::new();
    let mut blocks: Vec<(Vec<usize>, usize)> = Vec::new();
    enumerate_partitions(
        &mut vec![false; b],
        &mut blocks,
        max_steiner,
        &mut |blocks: &[(Vec<usize>, usize)]| {
            // Each block is realized by every tree shape with that many Steiner
            // vertices and leaves.
            let mut partial: Vec<Vec<(usize, usize, Option<ClassId>)>> = vec![Vec::new()];
            let mut next_steiner = b;
            for (members, s) in blocks {
                let mut realizations = Vec::new();
                if *s == 0 {
                    realizations.push(vec![(members[0], members[1], None)]);
                } else {
                    for shape in shapes.iter().filter(|sh| sh.steiner == *s && sh.leaf_slots.len() == members.len()) {
                        for assignment in leaf_assignments(shape, members) {
                            let mut edges: Vec<(usize, usize, Option<ClassId>)> = shape
                                .internal
                                .iter()
                                .map(|&(x, y)| (next_steiner + x, next_steiner + y, None))
                                .collect();
                            for (leaf, &slot) in assignment.iter().zip(&shape.leaf_slots) {
                                edges.push((*leaf, next_steiner + slot, None));
                            }
                            realizations.push(edges);
                        }
                    }
                }
                next_steiner += s;
                let mut grown = Vec::new();
                for p in &partial {
                    for r in &realizations {
                        let mut e = p.clone();
                        e.extend_from_slice(r);
                        grown.push(e);
                    }
                }
                partial = grown;
            }
            let steiner = next_steiner - b;
            for skeleton in partial {
                for charged in assign_charges(&skeleton, b, steiner, &classes, group) {
                    let topo = canonical(Topology { boundary: b, steiner, edges: charged }, group);
                    if seen.insert(topo.clone()) {
                        out.push(topo);
                    }
                }
            }
        },
    );
    Ok(out)
}

/// Partitions of the defects into blocks: pairs (no Steiner vertex) or
/// blocks of size ≥ 3 carrying `s ≥ 1` Steiner vertices, total `≤ max_steiner`.
fn enumerate_partitions(
    used: &mut Vec<bool>,
    blocks: &mut Vec<(Vec<usize>, usize)>,
    steiner_left: usize,
    emit: &mut dyn FnMut(&[(Vec<usize>, usize)]),
) {
    let Some(first) = used.iter().position(|&u| !u) else {
        emit(blocks);
        return;
    };
    used[first] = true;
    let free: Vec<usize> = (first + 1..used.len()).filter(|&j| !used[j]).collect();
    // Subsets of the remaining free points joined with `first`.
    let m = free.len();
    for mask in 1u32..(1u32 << m) {
        let mut members = vec![first];
        members.extend((0..m).filter(|k| mask & (1 << k) != 0).map(|k| free[k]));
        let size = members.len();
        let steiner_options: Vec<usize> = if size == 2 {
            vec![0]
        } else {
            // A tree with `size` leaves needs between 1 and size-2 internal
            // vertices of degree ≥ 3.
            (1..=steiner_left.min(size - 2)).collect()
        };
        for s in steiner_options {
            for &k in &members[1..] {
                used[k] = true;
            }
            blocks.push((members.clone(), s));
            enumerate_partitions(used, blocks, steiner_left - s, emit);
            blocks.pop();
            for &k in &members[1..] {
                used[k] = false;
            }
        }
    }
    used[first] = false;
}

/// Tree on `steiner` internal vertices; each internal vertex has enough
/// leaf slots to reach degree ≥ 3.
#[derive(Debug, Clone)]
struct TreeShape {
    steiner: usize,
    internal: Vec<(usize, usize)>,
    /// Internal vertex each leaf hangs from (sorted, repeated).
    leaf_slots: Vec<usize>,
}

fn tree_shapes(max_steiner: usize) -> Vec<TreeShape> {
    let mut shapes = Vec::new();
    for s in 1..=max_steiner {
        // Unlabeled trees on at most three vertices are paths.
        let internal: Vec<(usize, usize)> = (0..s - 1).map(|i| (i, i + 1)).collect();
        let mins: Vec<usize> = (0..s)
            .map(|v| 3usize.saturating_sub(internal.iter().filter(|e| e.0 == v || e.1 == v).count()))
            .collect();
        let mut counts = Vec::with_capacity(s);
        leaf_counts(&mins, &mut counts, 0, &mut |counts| {
            let leaf_slots = counts.iter().enumerate().flat_map(|(v, &c)| std::iter::repeat_n(v, c)).collect();
            shapes.push(TreeShape { steiner: s, internal: internal.clone(), leaf_slots });
        });
    }
    shapes
}

fn leaf_counts(mins: &[usize], counts: &mut Vec<usize>, used: usize, emit: &mut dyn FnMut(&[usize])) {
    if counts.len() == mins.len() {
        emit(counts);
        return;
    }
    let rest: usize = mins[counts.len() + 1..].iter().sum();
    let mut c = mins[counts.len()];
    while used + c + rest <= MAX_SPEC_POINTS {
        counts.push(c);
        leaf_counts(mins, counts, used + c, emit);
        counts.pop();
        c += 1;
    }
}

/// Distinct ways of distributing `members` over the leaf slots of `shape`,
/// modulo permutations within one slot.
fn leaf_assignments(shape: &TreeShape, members: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<Option<usize>> = vec![None; shape.leaf_slots.len()];
    fn rec(
        shape: &TreeShape,
        members: &[usize],
        idx: usize,
        current: &mut Vec<Option<usize>>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if idx == members.len() {
            out.push(current.iter().map(|x| x.unwrap()).collect());
            return;
        }
        let mut tried_slots = HashSet::new();
        for pos in 0..current.len() {
            if current[pos].is_some() {
                continue;
            }
            // Fill the first free position of each slot only.
            let slot = shape.leaf_slots[pos];
            if !tried_slots.insert(slot) {
                continue;
            }
            current[pos] = Some(members[idx]);
            rec(shape, members, idx + 1, current, out);
            current[pos] = None;
        }
    }
    rec(shape, members, 0, &mut current, &mut out);
    out
}

/// Charge assignments satisfying the flux rules on a forest skeleton.
fn assign_charges(
    skeleton: &[(usize, usize, Option<ClassId>)],
    boundary: usize,
    steiner: usize,
    classes: &[ClassId],
    group: &FiniteGroup,
) -> Vec<Vec<(usize, usize, ClassId)>> {
    let n = boundary + steiner;
    let required = |v: usize| if v < boundary { classes[v] } else { 0 };
    if group.is_abelian() {
        // On a tree, the edge charge is the flux of the defects on the far side.
        let mut edges = Vec::with_capacity(skeleton.len());
        for (idx, &(u, v, _)) in skeleton.iter().enumerate() {
            // Elements of the side containing v when edge idx is cut.
            let side = component_without_edge(skeleton, n, v, idx);
            // Outgoing at u toward v carries the total flux on v's side, inverted.
            let total = side
                .iter()
                .fold(0, |acc, &w| group.mul(acc, group.representative(required(w))));
            let charge = group.class_of(group.inv(total));
            if charge == 0 {
                return Vec::new();
            }
            edges.push((u, v, charge));
        }
        // Components must be neutral overall; check every vertex explicitly.
        let ok = (0..n).all(|w| {
            let g = edges.iter().fold(0, |acc, &(u, v, c)| {
                if u == w {
                    group.mul(acc, group.representative(c))
                } else if v == w {
                    group.mul(acc, group.inv(group.representative(c)))
                } else {
                    acc
                }
            });
            group.class_of(g) == required(w)
        });
        return if ok { vec![edges] } else { Vec::new() };
    }
    // Nonabelian: brute force over nontrivial charges, necessary condition.
    let nontrivial: Vec<ClassId> = (1..group.class_count()).collect();
    let mut out = Vec::new();
    let mut choice = vec![0usize; skeleton.len()];
    if nontrivial.is_empty() {
        return out;
    }
    loop {
        let edges: Vec<(usize, usize, ClassId)> = skeleton
            .iter()
            .zip(&choice)
            .map(|(&(u, v, _), &k)| (u, v, nontrivial[k]))
            .collect();
        let ok = (0..n).all(|w| {
            let incident: Vec<ClassId> = edges
                .iter()
                .filter_map(|&(u, v, c)| {
                    if u == w {
                        Some(c)
                    } else if v == w {
                        Some(group.inverse_class(c))
                    } else {
                        None
                    }
                })
                .collect();
            group.class_product(&incident).contains(required(w))
        });
        if ok {
            out.push(edges);
        }
        let mut k = 0;
        while k < choice.len() {
            choice[k] += 1;
            if choice[k] < nontrivial.len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
        if k == choice.len() {
            break;
        }
    }
    out
}

fn component_without_edge(edges: &[(usize, usize, Option<ClassId>)], n: usize, start: usize, cut: usize) -> Vec<usize> {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    let mut out = Vec::new();
    while let Some(x) = stack.pop() {
        out.push(x);
        for (i, &(u, v, _)) in edges.iter().enumerate() {
            if i == cut {
                continue;
            }
            let y = if u == x {
                v
            } else if v == x {
                u
            } else {
                continue;
            };
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    out
}

/// Canonical form under relabeling of Steiner vertices (≤ 3, so brute force
/// over permutations) and edge orientation.
fn canonical(t: Topology, group: &FiniteGroup) -> Topology {
    let perms = small_permutations(t.steiner);
    let mut best: Option<Vec<(usize, usize, ClassId)>> = None;
    for perm in perms {
        let relabel = |x: usize| if x < t.boundary { x } else { t.boundary + perm[x - t.boundary] };
        let mut edges: Vec<(usize, usize, ClassId)> = t
            .edges
            .iter()
            .map(|&(u, v, c)| {
                let (a, b) = (relabel(u), relabel(v));
                if a <= b {
                    (a, b, c)
                } else {
                    (b, a, group.inverse_class(c))
                }
            })
            .collect();
        edges.sort_unstable();
        if best.as_ref().is_none_or(|b| edges < *b) {
            best = Some(edges);
        }
    }
    let edges = best.unwrap_or_default();
    Topology { edges, ..t }
}

fn small_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for k in 0..n {
        let mut next = Vec::new();
        for p in &out {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k);
                next.push(q);
            }
        }
        out = next;
    }
    if out.is_empty() {
        out.push(Vec::new());
    }
    out
}

/// Options for [`optimize_positions`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the largest vertex move, relative to the
    /// configuration diameter.
    pub step_tol: f64,
    /// Convergence threshold on the largest balance residual.
    pub balance_tol: f64,
    /// Weiszfeld damping in `(0, 1]`.
    pub damping: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { max_iterations: 20_000, step_tol: 1e-13, balance_tol: 1e-9, damping: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub chain: Chain,
    pub iterations: usize,
    pub balance_max: f64,
    /// Steiner vertices merged into a neighbour.
    pub merges: usize,
    /// Mass after every sweep; nonincreasing.
    pub mass_history: Vec<f64>,
}

/// Move the interior vertices of `chain` to a stationary point of the mass
/// with boundary vertices fixed.
///
/// Gauss-Seidel Weiszfeld sweeps: each interior vertex jumps (damped) to the
/// weighted-median fixed point of its neighbours, which never increases the
/// mass. A vertex whose optimal position is one of its neighbours (the
/// classical degenerate Fermat case) is merged into that neighbour; when a
/// Weiszfeld step stalls next to a neighbour an Armijo gradient step is taken
/// instead.
pub fn optimize_positions(
    chain: &Chain,
    table: &EnergyTable,
    opts: &OptimizeOptions,
) -> Result<OptimizeOutcome, PlateauError> {
    let mut chain = chain.clone();
    let weights = edge_weights(&chain, table)?;
    let mut weights = weights;
    let diam = chain.diameter().max(f64::MIN_POSITIVE);
    let geo_tol = GEO_RELATIVE_TOL * diam;
    let mass = |c: &Chain, w: &[f64]| -> f64 { c.edges.iter().zip(w).map(|(e, wt)| wt * c.edge_length(e)).sum() };
    let mut history = vec![mass(&chain, &weights)];
    let mut merges = 0;

    if !chain.vertices.iter().any(|v| v.kind == VertexKind::Interior) {
        return Ok(OptimizeOutcome { chain, iterations: 0, balance_max: 0.0, merges, mass_history: history });
    }

    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut max_move: f64 = 0.0;
        let mut merged = false;
        for s in 0..chain.vertices.len() {
            if chain.vertices[s].kind != VertexKind::Interior {
                continue;
            }
            let neigh = neighbours(&chain, &weights, s);
            if neigh.is_empty() {
                continue;
            }
            let x = chain.vertices[s].pos;
            if let Some(target) = merge_target(&neigh, x, geo_tol) {
                merge_vertex(&mut chain, &mut weights, s, target);
                merges += 1;
                merged = true;
                break;
            }
            let local = |y: &Point| neigh.iter().map(|(_, p, w)| w * (p - y).norm()).sum::<f64>();
            let before = local(&x);
            let mut num = Point::zeros();
            let mut den = 0.0;
            let mut near = false;
            for (_, p, w) in &neigh {
                let d = (p - x).norm();
                if d <= geo_tol {
                    near = true;
                    break;
                }
                num += p * (w / d);
                den += w / d;
            }
            let mut next = if near { x } else { x + (num / den - x) * opts.damping };
            if near || local(&next) > before {
                next = armijo_step(&neigh, x, geo_tol, &local);
            }
            if local(&next) <= before {
                max_move = max_move.max((next - x).norm());
                chain.vertices[s].pos = next;
            }
        }
        let m = mass(&chain, &weights);
        history.push(m);
        if merged {
            continue;
        }
        let balance = balance_with(&chain, &weights);
        if max_move <= opts.step_tol * diam && balance <= opts.balance_tol {
            return Ok(OptimizeOutcome { chain, iterations, balance_max: balance, merges, mass_history: history });
        }
        if max_move == 0.0 {
            // Fully stalled: nothing further can be done by local moves.
            return Ok(OptimizeOutcome { chain, iterations, balance_max: balance, merges, mass_history: history });
        }
        if iterations >= opts.max_iterations {
            return Err(PlateauError::MaxIterations { iterations, balance, chain: Box::new(chain) });
        }
    }
}

fn edge_weights(chain: &Chain, table: &EnergyTable) -> Result<Vec<f64>, PlateauError> {
    chain
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| {
            table
                .energy(e.class)
                .filter(|w| w.is_finite())
                .ok_or(PlateauError::Chain(ChainError::UnknownClass { edge: i, class: e.class }))
        })
        .collect()
}

/// `(neighbour vertex, position, weight)` for every edge at `s`.
fn neighbours(chain: &Chain, weights: &[f64], s: usize) -> Vec<(usize, Point, f64)> {
    chain
        .edges
        .iter()
        .zip(weights)
        .filter_map(|(e, &w)| {
            let other = if e.u == s {
                e.v
            } else if e.v == s {
                e.u
            } else {
                return None;
            };
            Some((other, chain.vertices[other].pos, w))
        })
        .collect()
}

/// A neighbour where the weighted Fermat problem attains its minimum: the
/// pull of the remaining neighbours does not exceed that neighbour's weight.
fn merge_target(neigh: &[(usize, Point, f64)], x: Point, geo_tol: f64) -> Option<usize> {
    // Group coincident neighbours (same vertex reached by two edges).
    for (j, (vj, pj, _)) in neigh.iter().enumerate() {
        let own: f64 = neigh.iter().filter(|(v, _, _)| v == vj).map(|t| t.2).sum();
        let mut pull = Point::zeros();
        for (k, (vk, pk, wk)) in neigh.iter().enumerate() {
            if k == j || vk == vj {
                continue;
            }
            let d = pk - pj;
            let len = d.norm();
            if len > geo_tol {
                pull += d * (wk / len);
            }
        }
        let close = (x - pj).norm() <= 1e3 * geo_tol;
        if pull.norm() <= own * (1.0 + 1e-12) && (close || pull.norm() < own * (1.0 - 1e-9)) {
            return Some(*vj);
        }
    }
    None
}

fn merge_vertex(chain: &mut Chain, weights: &mut Vec<f64>, s: usize, target: usize) {
    let mut edges = Vec::new();
    let mut w = Vec::new();
    for (e, &wt) in chain.edges.iter().zip(weights.iter()) {
        let mut e = *e;
        if (e.u == s && e.v == target) || (e.v == s && e.u == target) {
            continue;
        }
        if e.u == s {
            e.u = target;
        }
        if e.v == s {
            e.v = target;
        }
        edges.push(e);
        w.push(wt);
    }
    chain.edges = edges;
    *weights = w;
    // Remove vertex s and renumber.
    chain.vertices.remove(s);
    for e in &mut chain.edges {
        if e.u > s {
            e.u -= 1;
        }
        if e.v > s {
            e.v -= 1;
        }
    }
}

fn armijo_step(neigh: &[(usize, Point, f64)], x: Point, geo_tol: f64, local: &dyn Fn(&Point) -> f64) -> Point {
    let mut grad = Point::zeros();
    for (_, p, w) in neigh {
        let d = x - p;
        let len = d.norm();
        if len > geo_tol {
            grad += d * (w / len);
        }
    }
    let g2 = grad.norm_squared();
    if g2 == 0.0 {
        return x;
    }
    let f0 = local(&x);
    let scale = neigh.iter().map(|(_, p, _)| (p - x).norm()).fold(0.0, f64::max).max(geo_tol);
    let mut t = scale / g2.sqrt();
    for _ in 0..60 {
        let cand = x - grad * t;
        if local(&cand) <= f0 - 1e-4 * t * g2 {
            return cand;
        }
        t *= 0.5;
    }
    x
}

fn balance_with(chain: &Chain, weights: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (s, v) in chain.vertices.iter().enumerate() {
        if v.kind != VertexKind::Interior {
            continue;
        }
        let mut f = Point::zeros();
        for (_, p, w) in neighbours(chain, weights, s) {
            let d = p - v.pos;
            let len = d.norm();
            if len > 0.0 {
                f += d * (w / len);
            }
        }
        worst = worst.max(f.norm());
    }
    worst
}

/// Options for [`solve_plateau`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub max_steiner: usize,
    pub runner_ups: usize,
    pub optimize: OptimizeOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_steiner: 1, runner_ups: 3, optimize: OptimizeOptions::default() }
    }
}

/// Minimize the mass over all enumerated topologies.
pub fn solve_plateau(
    spec: &BoundaryChargeSpec,
    group: &FiniteGroup,
    lengths: &LengthSpectrum,
    opts: &SolveOptions,
) -> Result<SolveReport, PlateauError> {
    if spec.is_empty() {
        return Ok(SolveReport::empty());
    }
    let table = ResolutionSearch::new(group, lengths)?.table(2.0)?;
    spec.check_classes(group).map_err(|e| PlateauError::Spec(e.to_string()))?;
    if group.order() == 2 {
        // No branching is possible with a single nontrivial class: every
        // interior vertex would need even degree, and splitting such a
        // vertex into pairs never increases the mass.
        let weight = table.energy(1).unwrap_or(f64::INFINITY);
        let m = MatchingOptions { runner_ups: opts.runner_ups, ..MatchingOptions::default() };
        return minimal_connection_matching(&spec.points(), weight, 1, &m);
    }
    let topologies = enumerate_topologies(spec, group, opts.max_steiner)?;
    if topologies.is_empty() {
        return Err(PlateauError::NoFeasibleTopology);
    }

    let results: Vec<Result<OptimizeOutcome, PlateauError>> = topologies
        .par_iter()
        .map(|t| {
            let start = t.initial_chain(spec);
            match optimize_positions(&start, &table, &opts.optimize) {
                Err(PlateauError::MaxIterations { chain, balance, iterations }) => Ok(OptimizeOutcome {
                    chain: *chain,
                    iterations,
                    balance_max: balance,
                    merges: 0,
                    mass_history: Vec::new(),
                }),
                other => other,
            }
        })
        .collect();

    let mut candidates: Vec<(f64, usize, OptimizeOutcome, bool)> = Vec::with_capacity(results.len());
    let mut iterations = 0;
    for (index, r) in results.into_iter().enumerate() {
        let outcome = r?;
        iterations += outcome.iterations;
        let mass = chain_mass(&outcome.chain, &table)?.total_mass;
        let report = validate_chain(&outcome.chain, spec, group);
        let crossing = report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::SegmentsIntersect { .. }));
        candidates.push((mass, index, outcome, crossing));
    }
    // Stable argmin by (mass, topology index).
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut distinct: Vec<(f64, Chain, f64, bool)> = Vec::new();
    for (mass, _, outcome, crossing) in candidates {
        let chain = normalize_chain(&outcome.chain);
        if distinct.iter().any(|(_, c, _, _)| same_geometry(c, &chain)) {
            continue;
        }
        distinct.push((mass, chain, outcome.balance_max, crossing));
    }
    let best_mass = distinct[0].0;
    let limit = best_mass * (1.0 + TIE_TOLERANCE) + f64::MIN_POSITIVE;
    let ties: Vec<Chain> = distinct.iter().filter(|d| d.0 <= limit).map(|d| d.1.clone()).collect();
    let runner_ups: Vec<(Chain, f64)> = distinct
        .iter()
        .filter(|d| d.0 > limit)
        .take(opts.runner_ups)
        .map(|d| (d.1.clone(), d.0))
        .collect();
    let (mass, best, _, crossing) = distinct.swap_remove(0);
    let balance_max = max_balance_residual(&best, &table)?;
    Ok(SolveReport { best, mass, runner_ups, balance_max, iterations, ties, crossing })
}

/// Drop unused vertices, orient edges from the lower vertex id and sort.
fn normalize_chain(chain: &Chain) -> Chain {
    let mut c = chain.compacted();
    c.provenance = Some(Provenance::Solver);
    c
}

fn same_geometry(a: &Chain, b: &Chain) -> bool {
    if a.edges.len() != b.edges.len() {
        return false;
    }
    let tol = 1e-7 * a.diameter().max(b.diameter()).max(f64::MIN_POSITIVE);
    let key = |c: &Chain| {
        let mut segs: Vec<(Point, Point, ClassId)> = c
            .edges
            .iter()
            .map(|e| {
                let (p, q) = (c.vertices[e.u].pos, c.vertices[e.v].pos);
                if lex_less(&p, &q) {
                    (p, q, e.class)
                } else {
                    (q, p, e.class)
                }
            })
            .collect();
        segs.sort_by(|x, y| {
            lex_cmp(&x.0, &y.0).then(lex_cmp(&x.1, &y.1))
        });
        segs
    };
    let (ka, kb) = (key(a), key(b));
    ka.iter().zip(&kb).all(|(x, y)| (x.0 - y.0).norm() <= tol && (x.1 - y.1).norm() <= tol)
}

fn lex_cmp(a: &Point, b: &Point) -> std::cmp::Ordering {
    let q = |v: f64| (v * 1e6).round();
    q(a.x).total_cmp(&q(b.x)).then(q(a.y).total_cmp(&q(b.y))).then(q(a.z).total_cmp(&q(b.z)))
}

fn lex_less(a: &Point, b: &Point) -> bool {
    lex_cmp(a, b) == std::cmp::Ordering::Less
}

/// Interior vertices of a chain, convenience for reports.
pub fn interior_vertices(chain: &Chain) -> impl Iterator<Item = (usize, &Vertex)> {
    chain.vertices.iter().enumerate().filter(|(_, v)| v.kind == VertexKind::Interior)
}
