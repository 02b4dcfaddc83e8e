//! Backward Euler with a Newton solve per step. Used as the exact
//! parameter-to-state map `S` and as the oracle for everything iterative.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::model::{row, Parameter, PdeModel, StateField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Newton stops once the update satisfies `|du|_inf <= tol (1 + |u|_inf)`.
    pub newton_tol: f64,
    pub newton_max: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-12,
            newton_max: 25,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) || self.newton_max == 0 {
            return Err(validation("newton_tol must be positive and newton_max at least 1"));
        }
        Ok(())
    }
}

/// `u = S(theta)`.
pub fn solve_forward(model: &PdeModel, theta: &Parameter, cfg: &SolverConfig) -> Result<StateField> {
    cfg.validate()?;
    let stiff = model.stiffness(theta)?;
    let disc = model.disc();
    let (nt, nx) = (disc.nt(), disc.nx());
    let s = disc.hx() / disc.ht();
    let mut u = Array2::zeros((nt + 1, nx));
    u.row_mut(0).assign(&theta.u0);
    for n in 0..nt {
        let prev = u.row(n).to_vec();
        let phi = theta.phi.row(n).to_vec();
        let mut w = prev.clone();
        let mut converged = false;
        let mut last = f64::INFINITY;
        for it in 0..cfg.newton_max {
            let f = model.slice_f(&stiff, theta, &w, &phi);
            let mut r: Vec<f64> = (0..nx).map(|i| -(s * (w[i] - prev[i]) + f[i])).collect();
            let mut jac = model.slice_jacobian(&stiff, theta, &w);
            jac.add_diagonal(&vec![s; nx]);
            let fac = jac.factor().ok_or(Error::Newton {
                step: n,
                residual: f64::NAN,
                iterations: it,
            })?;
            fac.solve_in_place(&mut r);
            let du_max = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..nx {
                w[i] += r[i];
            }
            let w_max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            last = du_max;
            if !du_max.is_finite() || !w_max.is_finite() {
                break;
            }
            if du_max <= cfg.newton_tol * (1.0 + w_max) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Newton {
                step: n,
                residual: last,
                iterations: cfg.newton_max,
            });
        }
        u.row_mut(n + 1).assign(&Array1::from(w));
    }
    Ok(u)
}

/// Linearised state `p = S'(theta) xi` around `u = S(theta)`.
pub fn solve_sensitivity(model: &PdeModel, theta: &Parameter, u: ArrayView2<f64>, xi: &Parameter) -> Result<StateField> {
    let src = model.apply_fprime_theta(theta, u, xi)?;
    let stiff = model.stiffness(theta)?;
    let disc = model.disc();
    let (nt, nx) = (disc.nt(), disc.nx());
    let s = disc.hx() / disc.ht();
    let mut p = Array2::zeros((nt + 1, nx));
    if theta.active.u0 {
        p.row_mut(0).assign(&xi.u0);
    }
    for n in 0..nt {
        let mut jac = model.slice_jacobian(&stiff, theta, &row(&u, n + 1));
        jac.add_diagonal(&vec![s; nx]);
        let rhs: Vec<f64> = (0..nx).map(|i| s * p[[n, i]] - src[[n, i]]).collect();
        let sol = jac.solve(&rhs).ok_or(Error::Newton {
            step: n,
            residual: f64::NAN,
            iterations: 0,
        })?;
        p.row_mut(n + 1).assign(&Array1::from(sol));
    }
    Ok(p)
}

/// Convenience bundle of a model and its solver settings.
#[derive(Debug, Clone)]
pub struct ReferenceSolver {
    pub model: PdeModel,
    pub cfg: SolverConfig,
}

impl ReferenceSolver {
    pub fn new(model: PdeModel, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { model, cfg })
    }

    pub fn forward(&self, theta: &Parameter) -> Result<StateField> {
        solve_forward(&self.model, theta, &self.cfg)
    }

    pub fn sensitivity(&self, theta: &Parameter, u: ArrayView2<f64>, xi: &Parameter) -> Result<StateField> {
        solve_sensitivity(&self.model, theta, u, xi)
    }
}
