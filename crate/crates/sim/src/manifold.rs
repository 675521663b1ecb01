//! Embedded target manifolds: nearest-point projection, tangent projection
//! and homotopy classes of closed loops.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use plateau_core::ClassId;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifoldError {
    #[error("ambient point has no unique nearest manifold point")]
    CutLocus,
    #[error("loop has fewer than 3 samples")]
    ShortLoop,
    #[error("consecutive loop samples are {0} apart; the loop is not resolved")]
    LoopJump(f64),
}

pub trait TargetManifold: Send + Sync {
    fn ambient_dim(&self) -> usize;

    /// Nearest point on the manifold, written to `out`.
    fn project(&self, x: &[f64], out: &mut [f64]) -> Result<(), ManifoldError>;

    /// Orthogonal projection of `v` onto the tangent space at the manifold
    /// point `at`.
    fn tangent_project(&self, at: &[f64], v: &[f64], out: &mut [f64]);

    /// Radius of the tube on which `project` is smooth.
    fn reach(&self) -> f64;

    /// Class of a closed loop given by consecutive manifold samples (the
    /// last sample connects back to the first).
    fn loop_class(&self, samples: &[Vec<f64>]) -> Result<ClassId, ManifoldError>;

    /// Free homotopy class count, `None` when infinite.
    fn class_count(&self) -> Option<usize>;

    fn name(&self) -> &'static str;
}

fn check_loop(samples: &[Vec<f64>], max_jump: f64) -> Result<(), ManifoldError> {
    if samples.len() < 3 {
        return Err(ManifoldError::ShortLoop);
    }
    for k in 0..samples.len() {
        let a = &samples[k];
        let b = &samples[(k + 1) % samples.len()];
        let d = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        if d > max_jump {
            return Err(ManifoldError::LoopJump(d));
        }
    }
    Ok(())
}

/// The unit circle in ℝ².
///
/// Its loops are classified by winding number `d`, encoded as a class id by
/// `0, 1, −1, 2, −2, …` ↦ `0, 1, 2, 3, 4, …`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Circle;

impl Circle {
    pub fn winding(samples: &[Vec<f64>]) -> Result<i64, ManifoldError> {
        check_loop(samples, 1.0)?;
        let mut total = 0.0;
        for k in 0..samples.len() {
            let a = &samples[k];
            let b = &samples[(k + 1) % samples.len()];
            let cross = a[0] * b[1] - a[1] * b[0];
            let dot = a[0] * b[0] + a[1] * b[1];
            total += cross.atan2(dot);
        }
        Ok((total / std::f64::consts::TAU).round() as i64)
    }

    pub fn class_of_degree(d: i64) -> ClassId {
        if d > 0 {
            (2 * d - 1) as ClassId
        } else {
            (-2 * d) as ClassId
        }
    }
}

impl TargetManifold for Circle {
    fn ambient_dim(&self) -> usize {
        2
    }

    fn project(&self, x: &[f64], out: &mut [f64]) -> Result<(), ManifoldError> {
        let r = x[0].hypot(x[1]);
        if !(r > 1e-12) {
            return Err(ManifoldError::CutLocus);
        }
        out[0] = x[0] / r;
        out[1] = x[1] / r;
        Ok(())
    }

    fn tangent_project(&self, at: &[f64], v: &[f64], out: &mut [f64]) {
        let d = at[0] * v[0] + at[1] * v[1];
        out[0] = v[0] - d * at[0];
        out[1] = v[1] - d * at[1];
    }

    fn reach(&self) -> f64 {
        1.0
    }

    fn loop_class(&self, samples: &[Vec<f64>]) -> Result<ClassId, ManifoldError> {
        Self::winding(samples).map(Self::class_of_degree)
    }

    fn class_count(&self) -> Option<usize> {
        None
    }

    fn name(&self) -> &'static str {
        "circle"
    }
}

/// The real projective plane as `{n⊗n − Id/3 : |n| = 1}` inside the
/// symmetric traceless 3×3 matrices, written in an orthonormal basis of that
/// 5-dimensional space. Class 1 is the nontrivial loop.
#[derive(Debug, Clone, Copy, Default)]
pub struct RealProjectivePlane;

const S2: f64 = std::f64::consts::SQRT_2;

impl RealProjectivePlane {
    pub fn to_matrix(x: &[f64]) -> Matrix3<f64> {
        let s6 = 6f64.sqrt();
        let (a, b) = (x[0] / S2, x[1] / s6);
        let (c, d, e) = (x[2] / S2, x[3] / S2, x[4] / S2);
        Matrix3::new(a + b, c, d, c, -a + b, e, d, e, -2.0 * b)
    }

    pub fn from_matrix(q: &Matrix3<f64>, out: &mut [f64]) {
        let s6 = 6f64.sqrt();
        out[0] = (q[(0, 0)] - q[(1, 1)]) / S2;
        out[1] = (q[(0, 0)] + q[(1, 1)] - 2.0 * q[(2, 2)]) / s6;
        out[2] = S2 * q[(0, 1)];
        out[3] = S2 * q[(0, 2)];
        out[4] = S2 * q[(1, 2)];
    }

    /// Ambient coordinates of the director `n` (any nonzero length).
    pub fn from_director(n: &Vector3<f64>) -> [f64; 5] {
        let n = n.normalize();
        let s6 = 6f64.sqrt();
        [
            (n.x * n.x - n.y * n.y) / S2,
            (n.x * n.x + n.y * n.y - 2.0 * n.z * n.z) / s6,
            S2 * n.x * n.y,
            S2 * n.x * n.z,
            S2 * n.y * n.z,
        ]
    }

    /// Leading eigenvector and the gap to the second eigenvalue.
    pub fn director(x: &[f64]) -> (Vector3<f64>, f64) {
        let eig = SymmetricEigen::new(Self::to_matrix(x));
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let n = eig.eigenvectors.column(order[0]).into_owned();
        (n, eig.eigenvalues[order[0]] - eig.eigenvalues[order[1]])
    }
}

impl TargetManifold for RealProjectivePlane {
    fn ambient_dim(&self) -> usize {
        5
    }

    fn project(&self, x: &[f64], out: &mut [f64]) -> Result<(), ManifoldError> {
        let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        let (n, gap) = Self::director(x);
        if !(gap > 1e-10 * scale) {
            return Err(ManifoldError::CutLocus);
        }
        out.copy_from_slice(&Self::from_director(&n));
        Ok(())
    }

    fn tangent_project(&self, at: &[f64], v: &[f64], out: &mut [f64]) {
        // at = n⊗n − Id/3, so n is the eigenvector for 2/3.
        let (n, _) = Self::director(at);
        let vm = Self::to_matrix(v);
        let vn = vm * n;
        let m = vn - n * n.dot(&vn);
        let t = n * m.transpose() + m * n.transpose();
        Self::from_matrix(&t, out);
    }

    fn reach(&self) -> f64 {
        1.0 / S2
    }

    fn loop_class(&self, samples: &[Vec<f64>]) -> Result<ClassId, ManifoldError> {
        check_loop(samples, 0.5)?;
        let first = Self::director(&samples[0]).0;
        let mut n = first;
        for s in samples.iter().skip(1).chain(std::iter::once(&samples[0])) {
            let (m, _) = Self::director(s);
            n = if m.dot(&n) >= 0.0 { m } else { -m };
        }
        Ok(if n.dot(&first) < 0.0 { 1 } else { 0 })
    }

    fn class_count(&self) -> Option<usize> {
        Some(2)
    }

    fn name(&self) -> &'static str {
        "rp2"
    }
}
