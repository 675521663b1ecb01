//! Topology enumeration against an exhaustive graph filter, and the solver
//! against brute-force matchings.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use plateau_core::plateau::Topology;
use plateau_core::{
    enumerate_topologies, rp2_systole, solve_plateau, validate_chain, BoundaryChargeSpec, FiniteGroup,
    LengthSpectrum, Point, SolveOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Edge sets of forests on `b` boundary plus `s` Steiner vertices, all edges
/// carrying the single nontrivial class of ℤ/2ℤ, in which boundary vertices
/// are leaves, Steiner vertices have degree ≥ 3 and every vertex satisfies
/// the parity flux rule. Canonicalized over Steiner relabelings.
fn oracle(b: usize, s: usize) -> BTreeSet<Vec<(usize, usize)>> {
    let n = b + s;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut out = BTreeSet::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        let edges: Vec<(usize, usize)> =
            (0..pairs.len()).filter(|k| mask & (1 << k) != 0).map(|k| pairs[k]).collect();
        let deg = |v: usize| edges.iter().filter(|e| e.0 == v || e.1 == v).count();
        if (0..b).any(|v| deg(v) != 1) || (b..n).any(|v| deg(v) < 3 || deg(v) % 2 == 1) {
            continue;
        }
        // forest: |E| = |V| - components
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        let mut cyclic = false;
        for &(u, v) in &edges {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru == rv {
                cyclic = true;
            }
            parent[ru] = rv;
        }
        if cyclic {
            continue;
        }
        let mut best: Option<Vec<(usize, usize)>> = None;
        for perm in permutations(s) {
            let f = |x: usize| if x < b { x } else { b + perm[x - b] };
            let mut e: Vec<(usize, usize)> =
                edges.iter().map(|&(u, v)| (f(u).min(f(v)), f(u).max(f(v)))).collect();
            e.sort_unstable();
            if best.as_ref().map_or(true, |x| e < *x) {
                best = Some(e);
            }
        }
        out.insert(best.unwrap());
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn strip(t: &Topology) -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = t.edges.iter().map(|&(u, v, _)| (u.min(v), u.max(v))).collect();
    e.sort_unstable();
    e
}

#[test]
fn z2_topologies_match_the_exhaustive_filter() {
    let g = FiniteGroup::cyclic(2);
    // b = 6 with two Steiner vertices is 2^28 edge subsets; stop at one.
    for (b, cap) in [(2usize, 2usize), (4, 2), (6, 1)] {
        let pts: Vec<Point> = (0..b)
            .map(|i| {
                let t = i as f64 / b as f64 * std::f64::consts::TAU;
                Point::new(t.cos(), t.sin(), 0.0)
            })
            .collect();
        let spec = BoundaryChargeSpec::uniform(&pts, 1).unwrap();
        for max_s in 0..=cap {
            let got: BTreeSet<Vec<(usize, usize)>> = enumerate_topologies(&spec, &g, max_s)
                .unwrap()
                .iter()
                .map(strip)
                .collect();
            let mut want = BTreeSet::new();
            for s in 0..=max_s {
                want.extend(oracle(b, s));
            }
            assert_eq!(got, want, "b={b} max_steiner={max_s}");
        }
    }
}

fn brute_matching(pts: &[Point]) -> f64 {
    fn rec(pts: &[Point], used: &mut Vec<bool>) -> f64 {
        let Some(i) = used.iter().position(|&u| !u) else { return 0.0 };
        used[i] = true;
        let mut best = f64::INFINITY;
        for j in i + 1..pts.len() {
            if !used[j] {
                used[j] = true;
                best = best.min((pts[i] - pts[j]).norm() + rec(pts, used));
                used[j] = false;
            }
        }
        used[i] = false;
        best
    }
    rec(pts, &mut vec![false; pts.len()])
}

#[test]
fn z2_solver_matches_brute_force_matchings() {
    let g = FiniteGroup::cyclic(2);
    let l = LengthSpectrum::new(&g, vec![0.0, rp2_systole()]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = 2 * rng.random_range(1..=5);
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                let v = Point::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                v.normalize()
            })
            .collect();
        let spec = BoundaryChargeSpec::uniform(&pts, 1).unwrap();
        let r = solve_plateau(&spec, &g, &l, &SolveOptions::default()).unwrap();
        let want = PI / 2.0 * brute_matching(&pts);
        assert!((r.mass - want).abs() <= 1e-12 * want);
        assert!(validate_chain(&r.best, &spec, &g).is_valid());
    }
}

#[test]
fn nonabelian_topologies_use_the_necessary_check() {
    let g = FiniteGroup::symmetric(3);
    // Class 1: transpositions, class 2: 3-cycles.
    assert_eq!(g.classes()[1].len(), 3);
    let pts = [Point::new(1.0, 0.0, 0.0), Point::new(-1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)];
    // Three transpositions multiply to an odd permutation, so no junction.
    let odd = BoundaryChargeSpec::uniform(&pts, 1).unwrap();
    assert!(enumerate_topologies(&odd, &g, 1).unwrap().is_empty());
    let mixed = BoundaryChargeSpec::new(
        pts.iter()
            .zip([1, 1, 2])
            .map(|(&pos, class)| plateau_core::BoundaryCharge { pos, class })
            .collect(),
    )
    .unwrap();
    let topo = enumerate_topologies(&mixed, &g, 1).unwrap();
    assert_eq!(topo.len(), 1);
    let t = &topo[0];
    assert_eq!(t.steiner, 1);
    for &(u, v, c) in &t.edges {
        let leaf = u.min(v);
        assert_eq!(c, mixed.charges[leaf].class);
    }
}
