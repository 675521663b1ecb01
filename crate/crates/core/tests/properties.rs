//! Randomized invariants of singular energies, chain masses and the hull
//! distance.

use std::f64::consts::PI;

use nalgebra::Rotation3;
use plateau_core::energy::charge_cost;
use plateau_core::geometry::hull_distance;
use plateau_core::{
    balance_residuals, chain_mass, Chain, EnergyTable, FiniteGroup, LengthSpectrum, Point, ResolutionSearch,
    VertexKind,
};
use proptest::prelude::*;

fn groups() -> Vec<FiniteGroup> {
    vec![
        FiniteGroup::cyclic(2),
        FiniteGroup::cyclic(5),
        FiniteGroup::cyclic(6),
        FiniteGroup::symmetric(3),
        FiniteGroup::cyclic(2).direct_product(&FiniteGroup::cyclic(4)),
    ]
}

fn spectrum(g: &FiniteGroup, raw: &[f64]) -> LengthSpectrum {
    let mut lambda = vec![0.0; g.class_count()];
    for c in 1..g.class_count() {
        let inv = g.inverse_class(c);
        lambda[c] = if inv < c { lambda[inv] } else { raw[c % raw.len()] };
    }
    LengthSpectrum::new(g, lambda).unwrap()
}

fn pt() -> impl Strategy<Value = Point> {
    (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Point::new(x, y, z))
}

fn weights(w: f64) -> EnergyTable {
    EnergyTable { p: 2.0, energies: vec![0.0, w, 2.0 * w], witness: Vec::new() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energies_respect_inverse_symmetry_and_single_charge_bound(
        gi in 0usize..5, raw in prop::collection::vec(0.5..15.0f64, 8), p in 1.0..=2.0f64
    ) {
        let g = &groups()[gi];
        let l = spectrum(g, &raw);
        let t = ResolutionSearch::new(g, &l).unwrap().table(p).unwrap();
        prop_assert_eq!(t.energies[0], 0.0);
        for c in 1..g.class_count() {
            let e = t.energies[c];
            prop_assert!(e <= charge_cost(l.get(c), p) * (1.0 + 1e-12));
            let ei = t.energies[g.inverse_class(c)];
            prop_assert!((e - ei).abs() <= 1e-12 * e);
        }
    }

    #[test]
    fn energy_is_lipschitz_in_p(
        gi in 0usize..5, raw in prop::collection::vec(0.5..15.0f64, 8), p1 in 1.0..=2.0f64, p2 in 1.0..=2.0f64
    ) {
        let g = &groups()[gi];
        let l = spectrum(g, &raw);
        let s = ResolutionSearch::new(g, &l).unwrap();
        // d/dp of λ^p/((2π)^(p-1) p) is bounded by this on [1, 2].
        let slope = |lam: f64| {
            let x = lam / (2.0 * PI);
            2.0 * PI * x.max(x * x) * (x.ln().abs() + 1.0)
        };
        for c in 0..g.class_count() {
            let r1 = s.resolution(c, p1).unwrap();
            let r2 = s.resolution(c, p2).unwrap();
            let k = [&r1, &r2]
                .iter()
                .map(|r| r.classes.iter().map(|&q| slope(l.get(q))).sum::<f64>())
                .fold(0.0, f64::max);
            prop_assert!((r1.total_energy - r2.total_energy).abs() <= k * (p1 - p2).abs() * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn mass_is_invariant_under_collinear_subdivision(a in pt(), b in pt(), t in 0.05..0.95f64, w in 0.1..5.0f64) {
        prop_assume!((a - b).norm() > 1e-3);
        let mut c = Chain::new();
        c.add_vertex(a, VertexKind::Boundary);
        c.add_vertex(b, VertexKind::Boundary);
        c.add_edge(0, 1, 1);
        let mut d = Chain::new();
        d.add_vertex(a, VertexKind::Boundary);
        d.add_vertex(b, VertexKind::Boundary);
        d.add_vertex(a + (b - a) * t, VertexKind::Interior);
        d.add_edge(0, 2, 1);
        d.add_edge(2, 1, 1);
        let table = weights(w);
        let m1 = chain_mass(&c, &table).unwrap().total_mass;
        let m2 = chain_mass(&d, &table).unwrap().total_mass;
        prop_assert!((m1 - m2).abs() <= 1e-12 * m1);
        let res = balance_residuals(&d, &table).unwrap();
        prop_assert!(res[0].1 <= 1e-9 * w);
    }

    #[test]
    fn mass_scales_linearly(pts in prop::collection::vec(pt(), 4), s in 0.1..10.0f64) {
        let mut c = Chain::new();
        for &q in &pts {
            c.add_vertex(q, VertexKind::Boundary);
        }
        c.add_edge(0, 1, 1);
        c.add_edge(2, 3, 2);
        let table = weights(PI / 2.0);
        let m = chain_mass(&c, &table).unwrap().total_mass;
        let ms = chain_mass(&c.scaled(s), &table).unwrap().total_mass;
        prop_assert!((ms - s * m).abs() <= 1e-12 * (s * m).max(1.0));
    }

    #[test]
    fn balance_is_rotation_invariant(
        pts in prop::collection::vec(pt(), 3), center in pt(), axis in pt(), angle in 0.0..std::f64::consts::TAU
    ) {
        let mut c = Chain::new();
        for &q in &pts {
            c.add_vertex(q, VertexKind::Boundary);
        }
        let s = c.add_vertex(center, VertexKind::Interior);
        prop_assume!(pts.iter().all(|q| (q - center).norm() > 1e-3));
        c.add_edge(0, s, 1);
        c.add_edge(1, s, 1);
        c.add_edge(s, 2, 2);
        let r = Rotation3::from_scaled_axis(axis.normalize() * angle);
        prop_assume!(axis.norm() > 1e-3);
        let table = weights(1.3);
        let before = balance_residuals(&c, &table).unwrap()[0].1;
        let after = balance_residuals(&c.transformed(r.matrix()), &table).unwrap()[0].1;
        prop_assert!((before - after).abs() <= 1e-10 * before.max(1.0));
    }

    #[test]
    fn hull_distance_agrees_with_frank_wolfe(pts in prop::collection::vec(pt(), 1..7), x in pt()) {
        let d = hull_distance(&x, &pts);
        // Frank-Wolfe on the simplex: an upper bound that converges slowly.
        let mut y = pts[0];
        for k in 0..20_000 {
            let g = y - x;
            let s = pts.iter().min_by(|a, b| g.dot(a).total_cmp(&g.dot(b))).unwrap();
            let gamma = 2.0 / (k as f64 + 2.0);
            y += (s - y) * gamma;
        }
        let fw = (y - x).norm();
        prop_assert!(d <= fw + 1e-9);
        prop_assert!(fw - d <= 1e-2 * (1.0 + fw));
        for q in &pts {
            prop_assert!(d <= (q - x).norm() + 1e-12);
        }
        // Convex combinations are inside.
        let mid = pts.iter().sum::<Point>() / pts.len() as f64;
        prop_assert!(hull_distance(&mid, &pts) <= 1e-9);
    }
}
