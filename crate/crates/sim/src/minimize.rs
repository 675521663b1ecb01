//! Projected (Riemannian) nonlinear conjugate gradients for the discrete
//! p-energy with fixed boundary values.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::energy::{energy_and_gradient, p_energy};
use crate::grid::{dot, GridError, GridMap, NodeKind};
use crate::manifold::TargetManifold;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MinimizeError {
    #[error("exponent p = {0} outside [1, 2]")]
    InvalidExponent(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("no admissible step at iteration {iteration}: every trial left the projection tube")]
    ProjectionOutOfReach { iteration: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Stop when the tangent gradient norm falls below `tol` times its
    /// initial value.
    pub tol: f64,
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Largest nodal displacement of a trial step, as a fraction of the reach.
    pub max_move: f64,
    /// Restart the conjugate direction every this many iterations.
    pub restart: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 5000, armijo: 1e-4, max_move: 0.5, restart: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    /// Returned the best iterate after `max_iter` steps.
    MaxIterations,
    /// The line search could not decrease the energy any further.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOutcome {
    pub map: GridMap,
    pub energy: f64,
    pub iterations: usize,
    pub initial_gradient: f64,
    pub final_gradient: f64,
    pub status: Status,
    /// Energy after every accepted step, starting with the initial energy.
    pub history: Vec<f64>,
}

/// Tangent-projected gradient at the inside nodes; zero elsewhere.
pub fn tangent_gradient(u: &GridMap, grad: &[f64], m: &dyn TargetManifold) -> Vec<f64> {
    let nu = u.nu;
    let mut out = vec![0.0; grad.len()];
    out.par_chunks_mut(nu).enumerate().for_each(|(i, o)| {
        if u.grid.kind(i) == NodeKind::Inside {
            m.tangent_project(u.value(i), &grad[i * nu..(i + 1) * nu], o);
        }
    });
    out
}

fn transport(u: &GridMap, v: &[f64], m: &dyn TargetManifold) -> Vec<f64> {
    tangent_gradient(u, v, m)
}

/// `R(u + t d)`: move the inside nodes and project back. `None` when some
/// node lands on the cut locus.
fn retract(u: &GridMap, d: &[f64], t: f64, m: &dyn TargetManifold) -> Option<GridMap> {
    let nu = u.nu;
    let mut next = u.clone();
    let ok = next.values.par_chunks_mut(nu).enumerate().all(|(i, v)| {
        if u.grid.kind(i) != NodeKind::Inside {
            return true;
        }
        let moved: Vec<f64> = v.iter().zip(&d[i * nu..(i + 1) * nu]).map(|(a, b)| a + t * b).collect();
        m.project(&moved, v).is_ok()
    });
    ok.then_some(next)
}

fn max_node_norm(v: &[f64], nu: usize) -> f64 {
    v.par_chunks(nu).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).reduce(|| 0.0, f64::max)
}

/// Minimize the p-energy over maps with the boundary values of `start`.
pub fn minimize(
    start: &GridMap,
    p: f64,
    m: &dyn TargetManifold,
    opts: &MinimizeOptions,
) -> Result<MinimizeOutcome, MinimizeError> {
    if !(1.0..=2.0).contains(&p) {
        return Err(MinimizeError::InvalidExponent(p));
    }
    start.check_on_manifold(m, 1e-10)?;
    let nu = start.nu;
    let mut u = start.clone();
    let (mut f, g) = energy_and_gradient(&u, p);
    let mut rg = tangent_gradient(&u, &g, m);
    let mut rg_sq = dot(&rg, &rg);
    let initial = rg_sq.sqrt();
    let mut history = vec![f];
    let mut d: Vec<f64> = rg.iter().map(|x| -x).collect();
    let mut t_prev = f64::NAN;
    let mut slope_prev = f64::NAN;
    let mut status = Status::MaxIterations;
    let mut iterations = 0;

    if initial == 0.0 {
        status = Status::Converged;
    }
    while status == Status::MaxIterations && iterations < opts.max_iter {
        if rg_sq.sqrt() <= opts.tol * initial {
            status = Status::Converged;
            break;
        }
        iterations += 1;
        let mut slope = dot(&rg, &d);
        if slope >= 0.0 {
            d = rg.iter().map(|x| -x).collect();
            slope = -rg_sq;
        }
        let dmax = max_node_norm(&d, nu);
        let cap = opts.max_move * m.reach() / dmax;
        let mut t = if t_prev.is_finite() { (1.5 * t_prev * slope_prev / slope).min(cap) } else { cap.min(1.0) };
        let mut accepted = None;
        let mut leaves_tube = 0;
        for _ in 0..80 {
            match retract(&u, &d, t, m) {
                Some(next) => {
                    let fn_ = p_energy(&next, p);
                    if fn_ <= f + opts.armijo * t * slope {
                        accepted = Some((next, fn_));
                        break;
                    }
                }
                None => leaves_tube += 1,
            }
            t *= 0.5;
        }
        let Some((next, f_next)) = accepted else {
            if leaves_tube >= 80 {
                return Err(MinimizeError::ProjectionOutOfReach { iteration: iterations });
            }
            status = Status::Stalled;
            break;
        };
        u = next;
        f = f_next;
        history.push(f);
        let (_, g) = energy_and_gradient(&u, p);
        let rg_new = tangent_gradient(&u, &g, m);
        let rg_new_sq = dot(&rg_new, &rg_new);
        // Polak-Ribière+ with vector transport by tangent projection.
        let old_moved = transport(&u, &rg, m);
        let beta = if iterations % opts.restart == 0 {
            0.0
        } else {
            ((rg_new_sq - dot(&rg_new, &old_moved)) / rg_sq).max(0.0)
        };
        let d_moved = transport(&u, &d, m);
        d = rg_new.iter().zip(&d_moved).map(|(g, dm)| -g + beta * dm).collect();
        t_prev = t;
        slope_prev = slope;
        rg = rg_new;
        rg_sq = rg_new_sq;
    }
    if status == Status::MaxIterations && rg_sq.sqrt() <= opts.tol * initial {
        status = Status::Converged;
    }
    Ok(MinimizeOutcome {
        energy: f,
        map: u,
        iterations,
        initial_gradient: initial,
        final_gradient: rg_sq.sqrt(),
        status,
        history,
    })
}

/// Add uniform noise of size `amplitude` to the inside values and project.
pub fn perturb(u: &mut GridMap, amplitude: f64, rng: &mut impl Rng, m: &dyn TargetManifold) -> Result<(), GridError> {
    let grid = u.grid.clone();
    for idx in 0..grid.node_count() {
        if grid.kind(idx) == NodeKind::Inside {
            for v in u.value_mut(idx) {
                *v += amplitude * rng.random_range(-1.0..1.0);
            }
        }
    }
    u.project_inside(m)
}
