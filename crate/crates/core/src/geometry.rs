//! Small geometric kernels: segment distances and point-to-hull distance.

use nalgebra::{DMatrix, Vector3};

pub type Point = Vector3<f64>;

/// Closest distance between segments `[p0, p1]` and `[q0, q1]`.
pub fn segment_distance(p0: &Point, p1: &Point, q0: &Point, q1: &Point) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let eps = 1e-300;
    let (s, t);
    if a <= eps && e <= eps {
        return r.norm();
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > eps * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}

/// Distance from `x` to the segment `[a, b]`.
pub fn point_segment_distance(x: &Point, a: &Point, b: &Point) -> f64 {
    let d = b - a;
    let len2 = d.dot(&d);
    if len2 == 0.0 {
        return (x - a).norm();
    }
    let t = ((x - a).dot(&d) / len2).clamp(0.0, 1.0);
    (x - (a + d * t)).norm()
}

/// Hausdorff distance between two polylines given as segment lists, sampled
/// at `samples` points per segment.
pub fn hausdorff_segments(a: &[(Point, Point)], b: &[(Point, Point)], samples: usize) -> f64 {
    fn one_sided(from: &[(Point, Point)], to: &[(Point, Point)], samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for (p, q) in from {
            for k in 0..=samples {
                let t = k as f64 / samples as f64;
                let x = p + (q - p) * t;
                let d = to
                    .iter()
                    .map(|(u, v)| point_segment_distance(&x, u, v))
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(d);
            }
        }
        worst
    }
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => one_sided(a, b, samples).max(one_sided(b, a, samples)),
    }
}

/// Affine dimension (0..=3) of a point set, with relative tolerance `tol`.
pub fn affine_dimension(points: &[Point], tol: f64) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let base = points[0];
    let m = DMatrix::from_fn(points.len() - 1, 3, |i, j| points[i + 1][j] - base[j]);
    let sv = m.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// Euclidean distance from `x` to the convex hull of `points`.
///
/// Wolfe's minimum-norm-point algorithm applied to the translated set
/// `{pᵢ − x}`; exact up to rounding and valid for degenerate (collinear or
/// coplanar) hulls.
pub fn hull_distance(x: &Point, points: &[Point]) -> f64 {
    assert!(!points.is_empty(), "hull of an empty set");
    let pts: Vec<Point> = points.iter().map(|p| p - x).collect();
    let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1e-300);
    let eps = 1e-12 * scale * scale;

    // Corral: indices with barycentric weights.
    let start = (0..pts.len())
        .min_by(|&i, &j| pts[i].norm_squared().total_cmp(&pts[j].norm_squared()))
        .unwrap();
    let mut set: Vec<usize> = vec![start];
    let mut w: Vec<f64> = vec![1.0];
    let mut y = pts[start];

    for _ in 0..(100 * pts.len() + 100) {
        // Major cycle: most violating point.
        let (j, val) = (0..pts.len())
            .map(|j| (j, y.dot(&pts[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if val >= y.norm_squared() - eps || set.contains(&j) {
            break;
        }
        set.push(j);
        w.push(0.0);
        // Minor cycles.
        loop {
            let v = affine_min_norm(&set.iter().map(|&i| pts[i]).collect::<Vec<_>>());
            if v.iter().all(|&vi| vi > 1e-14) {
                w = v;
                break;
            }
            // Step from w toward v until a weight hits zero.
            let mut theta: f64 = 1.0;
            for (wi, vi) in w.iter().zip(&v) {
                if *vi <= 1e-14 && wi - vi > 0.0 {
                    theta = theta.min(wi / (wi - vi));
                }
            }
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi = (1.0 - theta) * *wi + theta * vi;
            }
            let mut k = 0;
            while k < set.len() {
                if w[k] <= 1e-14 {
                    set.remove(k);
                    w.remove(k);
                } else {
                    k += 1;
                }
            }
            if set.len() <= 1 {
                w = vec![1.0; set.len()];
                break;
            }
        }
        let total: f64 = w.iter().sum();
        y = set.iter().zip(&w).map(|(&i, &wi)| pts[i] * (wi / total)).sum();
    }
    y.norm()
}

/// Barycentric weights of the minimum-norm point of the affine hull.
fn affine_min_norm(pts: &[Point]) -> Vec<f64> {
    let k = pts.len();
    if k == 1 {
        return vec![1.0];
    }
    // [ G 1 ; 1ᵀ 0 ] [w; μ] = [0; 1]
    let mut a = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = nalgebra::DVector::<f64>::zeros(k + 1);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] = pts[i].dot(&pts[j]);
        }
        a[(i, k)] = 1.0;
        a[(k, i)] = 1.0;
    }
    rhs[k] = 1.0;
    match a.clone().lu().solve(&rhs) {
        Some(sol) if sol.iter().all(|v| v.is_finite()) => sol.rows(0, k).iter().copied().collect(),
        _ => {
            // Affinely dependent corral: least-squares via pseudo-inverse.
            let pinv = a.pseudo_inverse(1e-14).expect("pseudo-inverse");
            let sol = pinv * rhs;
            sol.rows(0, k).iter().copied().collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn crossing_segments_touch() {
        let d = segment_distance(
            &Point::new(-1.0, 0.0, 0.0),
            &Point::new(1.0, 0.0, 0.0),
            &Point::new(0.0, -1.0, 0.0),
            &Point::new(0.0, 1.0, 0.0),
        );
        assert!(d < 1e-15);
        let d = segment_distance(
            &Point::new(-1.0, 0.0, 0.0),
            &Point::new(1.0, 0.0, 0.0),
            &Point::new(0.0, -1.0, 0.5),
            &Point::new(0.0, 1.0, 0.5),
        );
        assert_relative_eq!(d, 0.5);
        // parallel
        let d = segment_distance(
            &Point::new(0.0, 0.0, 0.0),
            &Point::new(1.0, 0.0, 0.0),
            &Point::new(2.0, 1.0, 0.0),
            &Point::new(3.0, 1.0, 0.0),
        );
        assert_relative_eq!(d, 2f64.sqrt());
    }

    #[test]
    fn hull_distance_tetrahedron() {
        let pts = [
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.0, 0.0, 1.0),
        ];
        assert!(hull_distance(&Point::new(0.1, 0.1, 0.1), &pts) < 1e-12);
        assert_relative_eq!(hull_distance(&Point::new(-0.1, 0.2, 0.2), &pts), 0.1, epsilon = 1e-12);
        assert_relative_eq!(hull_distance(&Point::new(1.0, 1.0, 1.0), &pts), 2.0 / 3f64.sqrt(), epsilon = 1e-12);
        // Degenerate: segment hull.
        let seg = [Point::new(0.0, 0.0, 0.0), Point::new(2.0, 0.0, 0.0)];
        assert_relative_eq!(hull_distance(&Point::new(1.0, 0.3, 0.0), &seg), 0.3, epsilon = 1e-12);
        assert_relative_eq!(hull_distance(&Point::new(3.0, 0.0, 0.0), &seg), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn affine_dimensions() {
        let square = [
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(1.0, 1.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
        ];
        assert_eq!(affine_dimension(&square, 1e-9), 2);
        assert_eq!(affine_dimension(&square[..2], 1e-9), 1);
        assert_eq!(affine_dimension(&square[..1], 1e-9), 0);
    }
}
