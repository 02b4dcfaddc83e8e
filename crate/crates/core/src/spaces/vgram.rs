//! Space-time Gram system of the state space `V`.
//!
//! With lumped mass `M = hx I` and `D_U = M + K_1`, the Gram matrix is
//!
//! ```text
//! G = ht (I_t (x) D_U) + (hx^2 / ht) (N_t (x) D_U^{-1})
//! ```
//!
//! where `N_t` is the Neumann difference Laplacian on the `nt + 1` time
//! levels. Both spatial factors are diagonal in the discrete sine basis, so
//! `G` splits into `nx` independent tridiagonal systems in time. That exact
//! solver is used as the CG preconditioner.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::linalg::{SymTridiag, TridiagFactor};
use crate::par::{map_range, Execution};

use super::grid::SpaceTimeGrid;
use super::operators::DiscreteOperators;

/// Preconditioner for the `V`-Gram conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VPreconditioner {
    None,
    #[default]
    SineModes,
}

/// Options for [`VGram::solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgOptions {
    pub rel_tol: f64,
    /// Iteration cap as a multiple of the number of unknowns.
    pub cap_factor: usize,
    pub preconditioner: VPreconditioner,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            cap_factor: 10,
            preconditioner: VPreconditioner::SineModes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct VGram {
    nx: usize,
    nt: usize,
    ht: f64,
    hx: f64,
    /// Orthonormal sine basis, column `k` is mode `k + 1`.
    basis: Array2<f64>,
    /// Per-mode time factorisations.
    mode_factors: Vec<TridiagFactor>,
}

impl VGram {
    pub(crate) fn new(grid: &SpaceTimeGrid, ops: &DiscreteOperators) -> Self {
        let nx = grid.nx;
        let nt = grid.nt;
        let np1 = nx as f64 + 1.0;
        let norm = (2.0 / np1).sqrt();
        let basis = Array2::from_shape_fn((nx, nx), |(i, k)| {
            norm * (((k + 1) * (i + 1)) as f64 * std::f64::consts::PI / np1).sin()
        });
        let hx = grid.hx;
        let ht = grid.ht;
        let mode_factors = (0..nx)
            .map(|k| {
                let theta = (k + 1) as f64 * std::f64::consts::PI / np1;
                let d_k = hx + (2.0 - 2.0 * theta.cos()) / hx;
                let mass_term = ht * d_k;
                let diff = hx * hx / (ht * d_k);
                let mut diag = vec![mass_term + 2.0 * diff; nt + 1];
                diag[0] = mass_term + diff;
                diag[nt] = mass_term + diff;
                let off = vec![-diff; nt];
                SymTridiag::new(diag, off)
                    .expect("valid shape")
                    .factor()
                    .expect("per-mode Gram block is positive definite")
            })
            .collect();
        debug_assert!(ops.mass.iter().all(|&m| (m - hx).abs() <= 1e-15 * hx));
        Self {
            nx,
            nt,
            ht,
            hx,
            basis,
            mode_factors,
        }
    }

    /// `G u` for a state field with `nt + 1` slices.
    pub(crate) fn apply(&self, ops: &DiscreteOperators, u: ArrayView2<f64>) -> Array2<f64> {
        let nt = self.nt;
        let mut out = Array2::zeros((nt + 1, self.nx));
        for n in 0..=nt {
            let du = ops.riesz_du.apply(&u.row(n).to_vec());
            for (o, v) in out.row_mut(n).iter_mut().zip(du) {
                *o = self.ht * v;
            }
        }
        let scale = self.hx * self.hx / self.ht;
        for n in 0..nt {
            let mut w: Vec<f64> = (0..self.nx).map(|i| u[[n + 1, i]] - u[[n, i]]).collect();
            ops.riesz_factor.solve_in_place(&mut w);
            for i in 0..self.nx {
                out[[n + 1, i]] += scale * w[i];
                out[[n, i]] -= scale * w[i];
            }
        }
        out
    }

    /// Exact `G^{-1} g` through the sine basis.
    pub(crate) fn direct_solve(&self, exec: Execution, g: ArrayView2<f64>) -> Array2<f64> {
        let hat = g.dot(&self.basis);
        let cols = map_range(exec, self.nx, |k| {
            let mut x = hat.column(k).to_vec();
            self.mode_factors[k].solve_in_place(&mut x);
            x
        });
        let mut sol_hat = Array2::zeros((self.nt + 1, self.nx));
        for (k, col) in cols.into_iter().enumerate() {
            for (n, v) in col.into_iter().enumerate() {
                sol_hat[[n, k]] = v;
            }
        }
        sol_hat.dot(&self.basis.t())
    }

    /// Preconditioned CG on `G x = g`.
    pub(crate) fn solve(
        &self,
        ops: &DiscreteOperators,
        exec: Execution,
        g: ArrayView2<f64>,
        opts: &CgOptions,
    ) -> Result<(Array2<f64>, CgStats)> {
        if g.dim() != (self.nt + 1, self.nx) {
            return Err(shape(format!(
                "V-Gram right-hand side has shape {:?}, expected ({}, {})",
                g.dim(),
                self.nt + 1,
                self.nx
            )));
        }
        let b_norm = frob(g);
        let unknowns = (self.nt + 1) * self.nx;
        let cap = opts.cap_factor.max(1) * unknowns;
        if b_norm == 0.0 {
            return Ok((
                Array2::zeros(g.raw_dim()),
                CgStats {
                    iterations: 0,
                    rel_residual: 0.0,
                },
            ));
        }
        let precond = |r: &Array2<f64>| -> Array2<f64> {
            match opts.preconditioner {
                VPreconditioner::None => r.clone(),
                VPreconditioner::SineModes => self.direct_solve(exec, r.view()),
            }
        };
        let mut x = Array2::<f64>::zeros(g.raw_dim());
        let mut r = g.to_owned();
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = sum_prod(&r, &z);
        let mut rel = 1.0;
        for it in 0..cap {
            let ap = self.apply(ops, p.view());
            let pap = sum_prod(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Cg {
                    iterations: it,
                    residual: rel,
                });
            }
            let alpha = rz / pap;
            x.scaled_add(alpha, &p);
            r.scaled_add(-alpha, &ap);
            rel = frob(r.view()) / b_norm;
            if rel <= opts.rel_tol {
                return Ok((
                    x,
                    CgStats {
                        iterations: it + 1,
                        rel_residual: rel,
                    },
                ));
            }
            z = precond(&r);
            let rz_new = sum_prod(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p *= beta;
            p += &z;
        }
        Err(Error::Cg {
            iterations: cap,
            residual: rel,
        })
    }
}

fn frob(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn sum_prod(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
