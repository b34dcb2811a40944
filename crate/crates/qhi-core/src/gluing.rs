//! Edge consistency equations on tetrahedron shapes and their Newton solver.
//!
//! Each tetrahedron carries one shape parameter z; its three edge levels are
//! z, 1/(1-z), 1-1/z.  Every edge class of the triangulation imposes one
//! multiplicative condition: the product of its levels, each raised to the
//! sign of the containing tetrahedron, equals 1.

use crate::dilog::bloch_wigner;
use crate::tri::{TriError, Triangulation};
use crate::{principal_log, C64};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GluingError {
    #[error(transparent)]
    Tri(#[from] TriError),
    #[error("initial shape {0} is too close to 0, 1 or infinity")]
    DegenerateInitial(C64),
    #[error("no convergence after {0} iterations, residual {1:.3e}")]
    NoConvergence(usize, f64),
    #[error("line search stalled at iteration {0}")]
    Stalled(usize),
}

/// One edge condition as (tet, level, sign) factors.
#[derive(Clone, Debug)]
pub struct EdgeEquation {
    pub factors: Vec<(usize, u8, i32)>,
}

#[derive(Clone, Debug)]
pub struct GluingSystem {
    pub equations: Vec<EdgeEquation>,
    pub tets: usize,
}

pub fn build_equations(tri: &Triangulation) -> Result<GluingSystem, GluingError> {
    let classes = tri.edge_classes()?;
    let equations = classes
        .iter()
        .map(|class| EdgeEquation {
            factors: class
                .uses
                .iter()
                .map(|u| (u.tet, u.level, tri.star(u.tet)))
                .collect(),
        })
        .collect();
    Ok(GluingSystem {
        equations,
        tets: tri.tets,
    })
}

/// Shape parameters, one per tetrahedron.
#[derive(Clone, Debug)]
pub struct Shapes {
    pub w0: Vec<C64>,
}

impl Shapes {
    /// Level r of tet j: z, 1/(1-z), 1-1/z.
    pub fn w(&self, tet: usize, level: u8) -> C64 {
        let z = self.w0[tet];
        let one = C64::new(1.0, 0.0);
        match level {
            0 => z,
            1 => one / (one - z),
            2 => one - one / z,
            _ => panic!("level out of range"),
        }
    }
}

fn dlog_level(z: C64, level: u8) -> C64 {
    let one = C64::new(1.0, 0.0);
    match level {
        0 => one / z,
        1 => one / (one - z),
        2 => one / (z - one) - one / z,
        _ => panic!("level out of range"),
    }
}

fn shape_degenerate(z: C64) -> bool {
    let one = C64::new(1.0, 0.0);
    z.norm() < 1e-10 || (z - one).norm() < 1e-10 || z.norm() > 1e10 || !z.is_finite()
}

/// Residual of each equation: the principal log of its product, zero
/// exactly on the solution set.
pub fn residuals(sys: &GluingSystem, shapes: &Shapes) -> Vec<C64> {
    sys.equations
        .iter()
        .map(|eq| {
            let prod = eq
                .factors
                .iter()
                .map(|&(t, l, s)| shapes.w(t, l).powi(s))
                .product();
            principal_log(prod)
        })
        .collect()
}

fn residual_norm(sys: &GluingSystem, shapes: &Shapes) -> f64 {
    residuals(sys, shapes)
        .iter()
        .map(|r| r.norm())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub shapes: Shapes,
    pub iterations: usize,
    pub residual: f64,
}

/// Damped Newton iteration with SVD least-squares steps.  The Jacobian is
/// rank-deficient on purpose (edge equations are dependent), which the
/// least-squares step absorbs.
pub fn solve(
    sys: &GluingSystem,
    initial: &[C64],
    opts: &SolveOptions,
) -> Result<NewtonReport, GluingError> {
    assert_eq!(initial.len(), sys.tets);
    if let Some(&z) = initial.iter().find(|&&z| shape_degenerate(z)) {
        return Err(GluingError::DegenerateInitial(z));
    }
    let mut shapes = Shapes {
        w0: initial.to_vec(),
    };
    let mut res = residual_norm(sys, &shapes);
    for iter in 0..opts.max_iter {
        if res < opts.tol {
            return Ok(NewtonReport {
                shapes,
                iterations: iter,
                residual: res,
            });
        }
        let r = residuals(sys, &shapes);
        let mut jac = DMatrix::<C64>::zeros(sys.equations.len(), sys.tets);
        for (e, eq) in sys.equations.iter().enumerate() {
            for &(t, l, s) in &eq.factors {
                jac[(e, t)] += C64::new(s as f64, 0.0) * dlog_level(shapes.w0[t], l);
            }
        }
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|x| -x));
        let svd = jac.svd(true, true);
        let step = svd
            .solve(&rhs, 1e-13)
            .map_err(|_| GluingError::Stalled(iter))?;

        let mut damping = 1.0f64;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = Shapes {
                w0: shapes
                    .w0
                    .iter()
                    .zip(step.iter())
                    .map(|(z, dz)| z + damping * dz)
                    .collect(),
            };
            if trial.w0.iter().all(|&z| !shape_degenerate(z)) {
                let trial_res = residual_norm(sys, &trial);
                if trial_res < res {
                    shapes = trial;
                    res = trial_res;
                    accepted = true;
                    break;
                }
            }
            damping *= 0.5;
        }
        if !accepted {
            return Err(GluingError::Stalled(iter));
        }
    }
    if res < opts.tol {
        return Ok(NewtonReport {
            shapes,
            iterations: opts.max_iter,
            residual: res,
        });
    }
    Err(GluingError::NoConvergence(opts.max_iter, res))
}

/// Signed sum of Bloch-Wigner values over the tetrahedra.
pub fn volume(tri: &Triangulation, shapes: &Shapes) -> f64 {
    (0..tri.tets)
        .map(|j| tri.star(j) as f64 * bloch_wigner(shapes.w0[j]))
        .sum()
}
