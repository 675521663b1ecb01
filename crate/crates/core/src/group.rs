//! Finite fundamental groups and their free homotopy classes.
//!
//! Free homotopy classes of loops `S¹ → N` are in bijection with the conjugacy
//! classes of `π₁(N)`. A [`FiniteGroup`] is a validated multiplication table
//! over element ids `0..order` (id `0` is the identity) together with its
//! inverse table and conjugacy class partition. Class `0` is always the
//! trivial class `{0}`.

use std::fmt;

use thiserror::Error;

/// Index of a conjugacy class (= free homotopy class of loops).
pub type ClassId = usize;

/// Index of a group element.
pub type ElementId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("multiplication table is empty")]
    Empty,
    #[error("row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("mul({a}, {b}) = {value} is out of range for a group of order {order}")]
    OutOfRange { a: ElementId, b: ElementId, value: usize, order: usize },
    #[error("element 0 is not a two-sided identity (fails against element {element})")]
    NoIdentity { element: ElementId },
    #[error("element {element} has no two-sided inverse")]
    NoInverse { element: ElementId },
    #[error("not associative: ({a}*{b})*{c} != {a}*({b}*{c})")]
    NotAssociative { a: ElementId, b: ElementId, c: ElementId },
}

/// A finite group given by its Cayley table.
#[derive(Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    order: usize,
    mul: Vec<ElementId>,
    inv: Vec<ElementId>,
    class_of: Vec<ClassId>,
    classes: Vec<Vec<ElementId>>,
}

impl fmt::Debug for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteGroup")
            .field("order", &self.order)
            .field("classes", &self.classes)
            .finish()
    }
}

impl FiniteGroup {
    /// Validates a square multiplication table and computes inverses and
    /// conjugacy classes.
    pub fn from_table(table: &[Vec<usize>]) -> Result<Self, GroupError> {
        let n = table.len();
        if n == 0 {
            return Err(GroupError::Empty);
        }
        for (row, entries) in table.iter().enumerate() {
            if entries.len() != n {
                return Err(GroupError::NotSquare { row, len: entries.len(), expected: n });
            }
            for (b, &value) in entries.iter().enumerate() {
                if value >= n {
                    return Err(GroupError::OutOfRange { a: row, b, value, order: n });
                }
            }
        }
        let mul: Vec<ElementId> = table.iter().flatten().copied().collect();
        let at = |a: usize, b: usize| mul[a * n + b];

        for a in 0..n {
            if at(0, a) != a || at(a, 0) != a {
                return Err(GroupError::NoIdentity { element: a });
            }
        }
        let mut inv = vec![0; n];
        for (a, slot) in inv.iter_mut().enumerate() {
            *slot = (0..n)
                .find(|&b| at(a, b) == 0 && at(b, a) == 0)
                .ok_or(GroupError::NoInverse { element: a })?;
        }
        for a in 0..n {
            for b in 0..n {
                let ab = at(a, b);
                for c in 0..n {
                    if at(ab, c) != at(a, at(b, c)) {
                        return Err(GroupError::NotAssociative { a, b, c });
                    }
                }
            }
        }

        const UNSET: usize = usize::MAX;
        let mut class_of = vec![UNSET; n];
        let mut classes = Vec::new();
        for x in 0..n {
            if class_of[x] != UNSET {
                continue;
            }
            let id = classes.len();
            let mut members: Vec<ElementId> = (0..n).map(|g| at(at(g, x), inv[g])).collect();
            members.sort_unstable();
            members.dedup();
            for &m in &members {
                class_of[m] = id;
            }
            classes.push(members);
        }

        Ok(Self { order: n, mul, inv, class_of, classes })
    }

    /// The cyclic group `ℤ/nℤ` with element `k` the residue `k`.
    pub fn cyclic(n: usize) -> Self {
        assert!(n >= 1, "cyclic group needs n >= 1");
        let table: Vec<Vec<usize>> = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        Self::from_table(&table).expect("cyclic table is a group")
    }

    /// The symmetric group on `n ≤ 5` letters; elements are permutations in
    /// lexicographic order, so the identity is element 0.
    pub fn symmetric(n: usize) -> Self {
        assert!((1..=5).contains(&n), "symmetric group supported for 1 <= n <= 5");
        let perms = permutations(n);
        let index = |p: &[usize]| perms.iter().position(|q| q.as_slice() == p).unwrap();
        let table: Vec<Vec<usize>> = perms
            .iter()
            .map(|a| {
                perms
                    .iter()
                    .map(|b| {
                        // (a*b)(i) = a(b(i))
                        let composed: Vec<usize> = (0..n).map(|i| a[b[i]]).collect();
                        index(&composed)
                    })
                    .collect()
            })
            .collect();
        Self::from_table(&table).expect("permutation table is a group")
    }

    /// Direct product; the pair `(x, y)` has id `x * other.order() + y`.
    pub fn direct_product(&self, other: &FiniteGroup) -> Self {
        let m = other.order;
        let n = self.order * m;
        let table: Vec<Vec<usize>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| self.mul(a / m, b / m) * m + other.mul(a % m, b % m))
                    .collect()
            })
            .collect();
        Self::from_table(&table).expect("product of groups is a group")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mul(&self, a: ElementId, b: ElementId) -> ElementId {
        self.mul[a * self.order + b]
    }

    pub fn inv(&self, a: ElementId) -> ElementId {
        self.inv[a]
    }

    pub fn class_of(&self, element: ElementId) -> ClassId {
        self.class_of[element]
    }

    pub fn classes(&self) -> &[Vec<ElementId>] {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Smallest element of the class.
    pub fn representative(&self, class: ClassId) -> ElementId {
        self.classes[class][0]
    }

    /// Class of the inverses (orientation reversal of the loop).
    pub fn inverse_class(&self, class: ClassId) -> ClassId {
        self.class_of(self.inv(self.representative(class)))
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order).all(|a| (0..self.order).all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    /// Multiplication table rows, suitable for [`FiniteGroup::from_table`].
    pub fn table(&self) -> Vec<Vec<usize>> {
        self.mul.chunks(self.order).map(<[usize]>::to_vec).collect()
    }

    /// The set containing only the trivial class.
    pub fn trivial_set(&self) -> ClassSet {
        ClassSet::single(self.class_count(), 0)
    }

    /// Product `A·B` of two conjugation-invariant subsets.
    ///
    /// `A·B` is again a union of classes, and since `B` is normal it suffices
    /// to multiply one representative per class of `A` by every element of `B`.
    pub fn product(&self, a: &ClassSet, b: &ClassSet) -> ClassSet {
        let mut out = ClassSet::empty(self.class_count());
        for ca in a.iter() {
            let x = self.representative(ca);
            for cb in b.iter() {
                for &y in &self.classes[cb] {
                    out.insert(self.class_of(self.mul(x, y)));
                }
            }
        }
        out
    }

    /// Set of classes reachable as a product of one element from each class of
    /// `factors`, in any order.
    pub fn class_product(&self, factors: &[ClassId]) -> ClassSet {
        factors.iter().fold(self.trivial_set(), |acc, &c| {
            self.product(&acc, &ClassSet::single(self.class_count(), c))
        })
    }
}

/// A conjugation-invariant subset of a group, stored as a set of class ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassSet(Vec<bool>);

impl ClassSet {
    pub fn empty(classes: usize) -> Self {
        Self(vec![false; classes])
    }

    pub fn single(classes: usize, class: ClassId) -> Self {
        let mut s = Self::empty(classes);
        s.insert(class);
        s
    }

    pub fn insert(&mut self, class: ClassId) {
        self.0[class] = true;
    }

    pub fn contains(&self, class: ClassId) -> bool {
        self.0.get(class).copied().unwrap_or(false)
    }

    pub fn iter(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.0.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn len(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z2_has_two_classes() {
        let g = FiniteGroup::from_table(&[vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(g.class_count(), 2);
        assert_eq!(g.inv(1), 1);
        assert!(g.is_abelian());
    }

    #[test]
    fn s3_class_sizes_match_conjugation_closure() {
        let g = FiniteGroup::symmetric(3);
        assert_eq!(g.order(), 6);
        // Brute-force conjugation orbits, independent of the class builder.
        let mut orbits: Vec<Vec<usize>> = Vec::new();
        for x in 0..6 {
            let mut orbit: Vec<usize> = (0..6).map(|h| g.mul(g.mul(h, x), g.inv(h))).collect();
            orbit.sort_unstable();
            orbit.dedup();
            if !orbits.contains(&orbit) {
                orbits.push(orbit);
            }
        }
        let mut sizes: Vec<usize> = orbits.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2, 3]);
        let mut ours: Vec<usize> = g.classes().iter().map(Vec::len).collect();
        assert_eq!(ours[0], 1);
        ours.sort_unstable();
        assert_eq!(ours, sizes);
        assert!(!g.is_abelian());
    }

    #[test]
    fn malformed_tables_are_rejected() {
        let err = FiniteGroup::from_table(&[vec![0, 1], vec![1, 2]]).unwrap_err();
        assert!(matches!(err, GroupError::OutOfRange { a: 1, b: 1, value: 2, .. }));

        let err = FiniteGroup::from_table(&[vec![1, 0], vec![0, 1]]).unwrap_err();
        assert!(matches!(err, GroupError::NoIdentity { .. }));

        let err = FiniteGroup::from_table(&[vec![0, 1, 2], vec![1, 1, 1], vec![2, 1, 0]]).unwrap_err();
        assert!(matches!(err, GroupError::NoInverse { element: 1 }));

        // Identity and inverses fine, associativity broken: a 3-element loop.
        let err =
            FiniteGroup::from_table(&[vec![0, 1, 2], vec![1, 0, 1], vec![2, 2, 0]]).unwrap_err();
        assert!(matches!(err, GroupError::NotAssociative { .. }));

        assert_eq!(FiniteGroup::from_table(&[]).unwrap_err(), GroupError::Empty);
        assert!(matches!(
            FiniteGroup::from_table(&[vec![0, 1], vec![1]]).unwrap_err(),
            GroupError::NotSquare { row: 1, .. }
        ));
    }

    #[test]
    fn classes_are_conjugation_closed_partitions() {
        for g in [FiniteGroup::symmetric(4), FiniteGroup::cyclic(6), FiniteGroup::cyclic(2).direct_product(&FiniteGroup::symmetric(3))] {
            let mut seen = vec![false; g.order()];
            for (c, members) in g.classes().iter().enumerate() {
                for &x in members {
                    assert!(!seen[x]);
                    seen[x] = true;
                    for h in 0..g.order() {
                        assert_eq!(g.class_of(g.mul(g.mul(h, x), g.inv(h))), c);
                    }
                }
            }
            assert!(seen.iter().all(|&b| b));
            assert_eq!(g.classes()[0], vec![0]);
        }
    }

    #[test]
    fn klein_product_sums() {
        let v4 = FiniteGroup::cyclic(2).direct_product(&FiniteGroup::cyclic(2));
        assert_eq!(v4.class_count(), 4);
        // a + b + (a+b) = 0 in (Z/2)^2
        let set = v4.class_product(&[1, 2, 3]);
        assert!(set.contains(0));
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn table_round_trips() {
        let g = FiniteGroup::symmetric(3);
        assert_eq!(FiniteGroup::from_table(&g.table()).unwrap(), g);
    }
}
