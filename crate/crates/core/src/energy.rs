//! Length spectra, topological resolutions and singular p-energies.
//!
//! The singular p-energy of a class `c` is the minimum of
//! `Σ λ(cᵢ)^p / ((2π)^{p-1} p)` over finite families of nontrivial classes
//! `c₁, …, c_k` whose product (for some choice of representatives) lies in
//! `c`. Products of conjugacy classes are conjugation invariant, so the search
//! runs over conjugation-invariant subsets of the group: adding one charge
//! multiplies the reachable set by a full class.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{ClassId, ClassSet, FiniteGroup};

/// Relative tolerance used to decide that two resolution costs tie.
pub const TIE_RELATIVE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("exponent p = {0} outside [1, 2]")]
    InvalidExponent(f64),
    #[error("class {class} does not exist (group has {count} classes)")]
    UnknownClass { class: ClassId, count: usize },
    #[error("class {class} cannot be resolved with the allowed charge palette")]
    InfeasibleClass { class: ClassId },
    #[error("length spectrum has {got} entries but the group has {expected} classes")]
    SpectrumSize { got: usize, expected: usize },
    #[error("length of the trivial class must be 0, got {0}")]
    TrivialLength(f64),
    #[error("class {class} is nontrivial but has length {lambda}")]
    NonPositiveLength { class: ClassId, lambda: f64 },
    #[error("class {class} has length {lambda} but its inverse class {inverse} has {inverse_lambda}")]
    AsymmetricLength { class: ClassId, lambda: f64, inverse: ClassId, inverse_lambda: f64 },
}

/// Cost of a single charge of geodesic length `lambda` at exponent `p`.
pub fn charge_cost(lambda: f64, p: f64) -> f64 {
    lambda.powf(p) / ((2.0 * PI).powf(p - 1.0) * p)
}

fn check_exponent(p: f64) -> Result<(), EnergyError> {
    if (1.0..=2.0).contains(&p) {
        Ok(())
    } else {
        Err(EnergyError::InvalidExponent(p))
    }
}

/// Minimal geodesic length per free homotopy class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSpectrum {
    lambda: Vec<f64>,
}

impl LengthSpectrum {
    pub fn new(group: &FiniteGroup, lambda: Vec<f64>) -> Result<Self, EnergyError> {
        if lambda.len() != group.class_count() {
            return Err(EnergyError::SpectrumSize { got: lambda.len(), expected: group.class_count() });
        }
        if lambda[0] != 0.0 {
            return Err(EnergyError::TrivialLength(lambda[0]));
        }
        for (class, &l) in lambda.iter().enumerate().skip(1) {
            if !(l.is_finite() && l > 0.0) {
                return Err(EnergyError::NonPositiveLength { class, lambda: l });
            }
            let inverse = group.inverse_class(class);
            let li = lambda[inverse];
            if (l - li).abs() > 1e-12 * l.max(li) {
                return Err(EnergyError::AsymmetricLength { class, lambda: l, inverse, inverse_lambda: li });
            }
        }
        Ok(Self { lambda })
    }

    /// Every nontrivial class gets the same length.
    pub fn uniform(group: &FiniteGroup, lambda: f64) -> Result<Self, EnergyError> {
        let mut l = vec![lambda; group.class_count()];
        l[0] = 0.0;
        Self::new(group, l)
    }

    pub fn get(&self, class: ClassId) -> f64 {
        self.lambda[class]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambda
    }

    /// Length of the shortest nontrivial closed geodesic, `+∞` when every
    /// class is trivial.
    pub fn systole(&self) -> f64 {
        self.lambda.iter().skip(1).copied().fold(f64::INFINITY, f64::min)
    }
}

/// Geodesic length of the nontrivial loop in the real projective plane
/// embedded as `{n⊗n − Id/3}` with the Frobenius metric: `√2·π`.
pub fn rp2_systole() -> f64 {
    std::f64::consts::SQRT_2 * PI
}

/// A multiset of nontrivial classes resolving a target class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Sorted ascending.
    pub classes: Vec<ClassId>,
    pub total_energy: f64,
}

/// Singular p-energies for every class at a fixed exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTable {
    pub p: f64,
    pub energies: Vec<f64>,
    pub witness: Vec<Resolution>,
}

impl EnergyTable {
    pub fn energy(&self, class: ClassId) -> Option<f64> {
        self.energies.get(class).copied()
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

/// Exact search for minimal topological resolutions.
///
/// The reachable state graph (conjugation-invariant subsets reachable from
/// `{e}` by multiplying with allowed classes) is built once and shared by all
/// queries.
#[derive(Debug, Clone)]
pub struct ResolutionSearch<'a> {
    group: &'a FiniteGroup,
    lengths: &'a LengthSpectrum,
    allowed: Vec<ClassId>,
    states: Vec<ClassSet>,
    /// `edges[s]` = list of `(class, successor)`.
    edges: Vec<Vec<(ClassId, usize)>>,
}

impl<'a> ResolutionSearch<'a> {
    pub fn new(group: &'a FiniteGroup, lengths: &'a LengthSpectrum) -> Result<Self, EnergyError> {
        Self::with_palette(group, lengths, None)
    }

    /// Restrict resolutions to the classes in `palette` (the trivial class is
    /// ignored if listed).
    pub fn with_palette(
        group: &'a FiniteGroup,
        lengths: &'a LengthSpectrum,
        palette: Option<&[ClassId]>,
    ) -> Result<Self, EnergyError> {
        let count = group.class_count();
        if lengths.as_slice().len() != count {
            return Err(EnergyError::SpectrumSize { got: lengths.as_slice().len(), expected: count });
        }
        let mut allowed: Vec<ClassId> = match palette {
            Some(p) => {
                for &c in p {
                    if c >= count {
                        return Err(EnergyError::UnknownClass { class: c, count });
                    }
                }
                p.iter().copied().filter(|&c| c != 0).collect()
            }
            None => (1..count).collect(),
        };
        allowed.sort_unstable();
        allowed.dedup();

        let start = group.trivial_set();
        let mut index: HashMap<ClassSet, usize> = HashMap::new();
        let mut states = vec![start.clone()];
        index.insert(start, 0);
        let mut edges: Vec<Vec<(ClassId, usize)>> = vec![Vec::new()];
        let mut cursor = 0;
        while cursor < states.len() {
            let current = states[cursor].clone();
            for &c in &allowed {
                let next = group.product(&current, &ClassSet::single(count, c));
                let id = match index.get(&next) {
                    Some(&id) => id,
                    None => {
                        let id = states.len();
                        index.insert(next.clone(), id);
                        states.push(next);
                        edges.push(Vec::new());
                        id
                    }
                };
                edges[cursor].push((c, id));
            }
            cursor += 1;
        }
        Ok(Self { group, lengths, allowed, states, edges })
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// Cost-to-go from every state to any state containing `target`.
    fn distances_to(&self, target: ClassId, p: f64) -> Vec<f64> {
        let n = self.states.len();
        let mut reverse: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (s, out) in self.edges.iter().enumerate() {
            for &(c, t) in out {
                reverse[t].push((s, charge_cost(self.lengths.get(c), p)));
            }
        }
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        for (s, set) in self.states.iter().enumerate() {
            if set.contains(target) {
                dist[s] = 0.0;
                heap.push(HeapEntry { cost: 0.0, node: s });
            }
        }
        while let Some(HeapEntry { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for &(prev, w) in &reverse[node] {
                let cand = cost + w;
                if cand < dist[prev] {
                    dist[prev] = cand;
                    heap.push(HeapEntry { cost: cand, node: prev });
                }
            }
        }
        dist
    }

    /// Minimal resolution of `target`; ties broken by the lexicographically
    /// smallest sorted class multiset.
    pub fn resolution(&self, target: ClassId, p: f64) -> Result<Resolution, EnergyError> {
        check_exponent(p)?;
        let count = self.group.class_count();
        if target >= count {
            return Err(EnergyError::UnknownClass { class: target, count });
        }
        let dist = self.distances_to(target, p);
        if !dist[0].is_finite() {
            return Err(EnergyError::InfeasibleClass { class: target });
        }
        // Greedy extraction: the lexicographically smallest optimal multiset
        // starts with the smallest class that appears in any optimal one.
        let mut state = 0;
        let mut classes = Vec::new();
        let slack = |d: f64| d * TIE_RELATIVE + 1e-15;
        while dist[state] > 0.0 {
            let step = self.edges[state]
                .iter()
                .find(|&&(c, t)| {
                    charge_cost(self.lengths.get(c), p) + dist[t] <= dist[state] + slack(dist[0])
                })
                .copied();
            let (c, t) = step.expect("an optimal successor exists for every finite distance");
            classes.push(c);
            state = t;
            assert!(classes.len() <= self.states.len() * count.max(1), "resolution extraction did not terminate");
        }
        classes.sort_unstable();
        let total_energy = classes.iter().map(|&c| charge_cost(self.lengths.get(c), p)).sum();
        Ok(Resolution { classes, total_energy })
    }

    pub fn energy(&self, target: ClassId, p: f64) -> Result<f64, EnergyError> {
        self.resolution(target, p).map(|r| r.total_energy)
    }

    /// Singular energies for every class; classes that cannot be resolved
    /// with the palette get `+∞` and an empty witness.
    pub fn table(&self, p: f64) -> Result<EnergyTable, EnergyError> {
        check_exponent(p)?;
        let mut energies = Vec::with_capacity(self.group.class_count());
        let mut witness = Vec::with_capacity(self.group.class_count());
        for c in 0..self.group.class_count() {
            match self.resolution(c, p) {
                Ok(r) => {
                    energies.push(r.total_energy);
                    witness.push(r);
                }
                Err(EnergyError::InfeasibleClass { .. }) => {
                    energies.push(f64::INFINITY);
                    witness.push(Resolution { classes: Vec::new(), total_energy: f64::INFINITY });
                }
                Err(e) => return Err(e),
            }
        }
        Ok(EnergyTable { p, energies, witness })
    }

    pub fn allowed(&self) -> &[ClassId] {
        &self.allowed
    }
}

/// Singular p-energy of `class`.
pub fn singular_energy(
    group: &FiniteGroup,
    lengths: &LengthSpectrum,
    class: ClassId,
    p: f64,
) -> Result<f64, EnergyError> {
    ResolutionSearch::new(group, lengths)?.energy(class, p)
}

/// A p-minimal resolution of `class`.
pub fn minimal_resolution(
    group: &FiniteGroup,
    lengths: &LengthSpectrum,
    class: ClassId,
    p: f64,
) -> Result<Resolution, EnergyError> {
    ResolutionSearch::new(group, lengths)?.resolution(class, p)
}

/// Singular p-energy for every class.
pub fn class_energy_table(
    group: &FiniteGroup,
    lengths: &LengthSpectrum,
    p: f64,
) -> Result<EnergyTable, EnergyError> {
    ResolutionSearch::new(group, lengths)?.table(p)
}

/// Closed-form mode for circle-valued maps: `π₁ = ℤ`, `λ(d) = 2π|d|`.
///
/// Resolutions are multisets of nonzero integer charges with `|dᵢ| ≤ cap`
/// summing to the target degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegerCharges {
    pub cap: u32,
}

/// A resolution of an integer degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerResolution {
    /// Sorted ascending.
    pub charges: Vec<i64>,
    pub total_energy: f64,
}

impl Default for IntegerCharges {
    fn default() -> Self {
        Self { cap: 8 }
    }
}

impl IntegerCharges {
    pub fn new(cap: u32) -> Self {
        assert!(cap >= 1, "charge cap must be at least 1");
        Self { cap }
    }

    pub fn length(d: i64) -> f64 {
        2.0 * PI * d.unsigned_abs() as f64
    }

    pub fn resolution(&self, degree: i64, p: f64) -> Result<IntegerResolution, EnergyError> {
        check_exponent(p)?;
        if degree == 0 {
            return Ok(IntegerResolution { charges: Vec::new(), total_energy: 0.0 });
        }
        let cap = i64::from(self.cap);
        // Some ordering of any multiset keeps partial sums inside this window.
        let lo = degree.min(0) - cap;
        let hi = degree.max(0) + cap;
        let width = (hi - lo + 1) as usize;
        let idx = |s: i64| (s - lo) as usize;
        let steps: Vec<i64> = (-cap..=cap).filter(|&q| q != 0).collect();
        let cost = |q: i64| charge_cost(Self::length(q), p);

        // Distance from every partial sum to the target degree.
        let mut dist = vec![f64::INFINITY; width];
        dist[idx(degree)] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry { cost: 0.0, node: idx(degree) });
        while let Some(HeapEntry { cost: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            let s = node as i64 + lo;
            for &q in &steps {
                let prev = s - q;
                if prev < lo || prev > hi {
                    continue;
                }
                let cand = d + cost(q);
                if cand < dist[idx(prev)] {
                    dist[idx(prev)] = cand;
                    heap.push(HeapEntry { cost: cand, node: idx(prev) });
                }
            }
        }
        let best = dist[idx(0)];
        let slack = best * TIE_RELATIVE + 1e-15;
        let mut s = 0i64;
        let mut charges = Vec::new();
        while s != degree {
            let q = steps
                .iter()
                .copied()
                .find(|&q| {
                    let t = s + q;
                    (lo..=hi).contains(&t) && cost(q) + dist[idx(t)] <= dist[idx(s)] + slack
                })
                .expect("optimal step exists");
            charges.push(q);
            s += q;
        }
        charges.sort_unstable();
        let total_energy = charges.iter().map(|&q| cost(q)).sum();
        Ok(IntegerResolution { charges, total_energy })
    }

    pub fn energy(&self, degree: i64, p: f64) -> Result<f64, EnergyError> {
        self.resolution(degree, p).map(|r| r.total_energy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
