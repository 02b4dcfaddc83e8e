//! Parameter, state, residual and linearisations of the semilinear
//! parabolic model
//!
//! ```text
//! u_t - d/dx (a u_x) + c u + Phi(u) = phi,   u(0) = u0,
//! ```
//!
//! written as `F(theta, u) = (u_t + f(theta, u), u0 - u(0)) = 0` on the
//! space-time grid with backward Euler in time.

mod nonlinearity;
mod parameter;

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use nonlinearity::Nonlinearity;
pub use parameter::{ActiveSet, Parameter};

use crate::error::{shape, validation, Result};
use crate::linalg::SymTridiag;
use crate::spaces::{check_coefficient, stiffness_bilinear_gradient, stiffness_matrix, Discretization};

/// Nodal state on all `nt + 1` time slices (row `n` is `u(t_n, .)`).
pub type StateField = Array2<f64>;

/// Residual split into the evolution part (dual vectors, one per time step)
/// and the initial-condition part (nodal values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualPair {
    pub pde_part: Array2<f64>,
    pub init_part: Array1<f64>,
}

impl ResidualPair {
    pub fn zeros(nt: usize, nx: usize) -> Self {
        Self {
            pde_part: Array2::zeros((nt, nx)),
            init_part: Array1::zeros(nx),
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &ResidualPair) {
        self.pde_part.scaled_add(alpha, &other.pde_part);
        self.init_part.scaled_add(alpha, &other.init_part);
    }

    pub fn sub(&self, other: &ResidualPair) -> ResidualPair {
        ResidualPair {
            pde_part: &self.pde_part - &other.pde_part,
            init_part: &self.init_part - &other.init_part,
        }
    }
}

/// The discretised model: grid, operators and nonlinearity.
#[derive(Debug, Clone)]
pub struct PdeModel {
    disc: Arc<Discretization>,
    nonlinearity: Nonlinearity,
}

pub(crate) fn row(u: &ArrayView2<f64>, n: usize) -> Vec<f64> {
    u.row(n).to_vec()
}

impl PdeModel {
    pub fn new(disc: Arc<Discretization>, nonlinearity: Nonlinearity) -> Result<Self> {
        nonlinearity.validate()?;
        Ok(Self { disc, nonlinearity })
    }

    pub fn disc(&self) -> &Discretization {
        &self.disc
    }

    pub fn disc_arc(&self) -> Arc<Discretization> {
        self.disc.clone()
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn check_state(&self, u: ArrayView2<f64>) -> Result<()> {
        let g = self.disc.grid();
        if u.dim() != (g.nt + 1, g.nx) {
            return Err(shape(format!(
                "state field has shape {:?}, expected ({}, {})",
                u.dim(),
                g.nt + 1,
                g.nx
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(validation("state field contains non-finite values"));
        }
        Ok(())
    }

    pub fn check_parameter(&self, theta: &Parameter) -> Result<()> {
        theta.check_shape(self.disc.grid())?;
        check_coefficient(theta.a.as_slice().unwrap(), theta.a_lower, self.disc.nx())
    }

    /// Stiffness for the diffusion coefficient of `theta` (validated).
    pub fn stiffness(&self, theta: &Parameter) -> Result<SymTridiag> {
        self.check_parameter(theta)?;
        stiffness_matrix(self.disc.grid(), theta.a.as_slice().unwrap())
    }

    /// Jacobian of `f(theta, .)` at one slice: `K_a + M diag(c + Phi'(u))`.
    pub(crate) fn slice_jacobian(&self, stiff: &SymTridiag, theta: &Parameter, u: &[f64]) -> SymTridiag {
        let hx = self.disc.hx();
        let mut j = stiff.clone();
        let extra: Vec<f64> = u
            .iter()
            .zip(theta.c.iter())
            .map(|(ui, ci)| hx * (ci + self.nonlinearity.derivative(*ui)))
            .collect();
        j.add_diagonal(&extra);
        j
    }

    /// `f(theta, u) - M phi` at one step, given the new slice `u` and source row.
    pub(crate) fn slice_f(&self, stiff: &SymTridiag, theta: &Parameter, u: &[f64], phi: &[f64]) -> Vec<f64> {
        let hx = self.disc.hx();
        let mut out = stiff.apply(u);
        for i in 0..u.len() {
            out[i] += hx * (theta.c[i] * u[i] + self.nonlinearity.eval(u[i]) - phi[i]);
        }
        out
    }

    /// `F(theta, u)`.
    pub fn residual(&self, theta: &Parameter, u: ArrayView2<f64>) -> Result<ResidualPair> {
        self.check_state(u)?;
        let stiff = self.stiffness(theta)?;
        let nt = self.disc.nt();
        let nx = self.disc.nx();
        let s = self.disc.hx() / self.disc.ht();
        let mut pde = Array2::zeros((nt, nx));
        for n in 0..nt {
            let un1 = row(&u, n + 1);
            let f = self.slice_f(&stiff, theta, &un1, &theta.phi.row(n).to_vec());
            for i in 0..nx {
                pde[[n, i]] = s * (un1[i] - u[[n, i]]) + f[i];
            }
        }
        let init = &theta.u0 - &u.row(0);
        Ok(ResidualPair {
            pde_part: pde,
            init_part: init,
        })
    }

    /// Norm in `CalUstar x H`.
    pub fn residual_norm(&self, r: &ResidualPair) -> f64 {
        self.residual_inner(r, r).max(0.0).sqrt()
    }

    pub fn residual_inner(&self, r: &ResidualPair, w: &ResidualPair) -> f64 {
        self.disc.inner_cal_ustar(r.pde_part.view(), w.pde_part.view())
            + self
                .disc
                .inner_h(r.init_part.as_slice().unwrap(), w.init_part.as_slice().unwrap())
    }

    /// `f'_u(theta, u) h`, one dual vector per time step (slice `n + 1`).
    pub fn apply_fprime_u(&self, theta: &Parameter, u: ArrayView2<f64>, h: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_state(u)?;
        self.check_state(h)?;
        let stiff = self.stiffness(theta)?;
        let nt = self.disc.nt();
        let mut out = Array2::zeros((nt, self.disc.nx()));
        for n in 0..nt {
            let jac = self.slice_jacobian(&stiff, theta, &row(&u, n + 1));
            let v = jac.apply(&row(&h, n + 1));
            out.row_mut(n).assign(&Array1::from(v));
        }
        Ok(out)
    }

    fn check_direction(&self, theta: &Parameter, xi: &Parameter) -> Result<()> {
        xi.check_shape(self.disc.grid())?;
        if xi.active != theta.active {
            return Err(validation("direction and parameter have different active sets"));
        }
        xi.check_inactive_zero()
    }

    /// `f'_theta(theta, u) xi`, one dual vector per time step.
    pub fn apply_fprime_theta(&self, theta: &Parameter, u: ArrayView2<f64>, xi: &Parameter) -> Result<Array2<f64>> {
        self.check_state(u)?;
        self.check_parameter(theta)?;
        self.check_direction(theta, xi)?;
        let nt = self.disc.nt();
        let nx = self.disc.nx();
        let hx = self.disc.hx();
        let k_xi = stiffness_matrix(self.disc.grid(), xi.a.as_slice().unwrap())?;
        let mut out = Array2::zeros((nt, nx));
        for n in 0..nt {
            let un1 = row(&u, n + 1);
            let ka = if xi.active.a { k_xi.apply(&un1) } else { vec![0.0; nx] };
            for i in 0..nx {
                out[[n, i]] = ka[i] + hx * (xi.c[i] * un1[i] - xi.phi[[n, i]]);
            }
        }
        Ok(out)
    }

    /// `F'(u) h = (h_t + f'_u h, -h(0))`.
    pub fn apply_fprime(&self, theta: &Parameter, u: ArrayView2<f64>, h: ArrayView2<f64>) -> Result<ResidualPair> {
        let mut pde = self.apply_fprime_u(theta, u, h)?;
        pde += &self.disc.time_derivative(h);
        Ok(ResidualPair {
            pde_part: pde,
            init_part: h.row(0).mapv(|v| -v),
        })
    }

    /// Dual vector of `h -> (F'(u) h, w)` in `CalUstar x H`.
    pub fn fprime_dual(&self, theta: &Parameter, u: ArrayView2<f64>, w: &ResidualPair) -> Result<Array2<f64>> {
        self.check_state(u)?;
        let stiff = self.stiffness(theta)?;
        let nt = self.disc.nt();
        let nx = self.disc.nx();
        if w.pde_part.dim() != (nt, nx) || w.init_part.len() != nx {
            return Err(shape("residual-shaped argument does not match the grid"));
        }
        let ht = self.disc.ht();
        let s = self.disc.hx() / ht;
        let mut g = Array2::zeros((nt + 1, nx));
        for n in 0..nt {
            let what: Vec<f64> = self
                .disc
                .riesz_solve(&w.pde_part.row(n).to_vec())
                .into_iter()
                .map(|v| ht * v)
                .collect();
            let jac = self.slice_jacobian(&stiff, theta, &row(&u, n + 1));
            let bw = jac.apply(&what);
            for i in 0..nx {
                g[[n + 1, i]] += s * what[i] + bw[i];
                g[[n, i]] -= s * what[i];
            }
        }
        let hx = self.disc.hx();
        for i in 0..nx {
            g[[0, i]] -= hx * w.init_part[i];
        }
        Ok(g)
    }

    /// `F'(u)*` with respect to `CalV` and `CalUstar x H`.
    pub fn apply_fprime_adjoint(&self, theta: &Parameter, u: ArrayView2<f64>, w: &ResidualPair) -> Result<StateField> {
        let g = self.fprime_dual(theta, u, w)?;
        self.disc.v_representer(g.view())
    }

    /// Dual vector in `X*` of `xi -> sum_n weights_n . (f'_theta xi)_n`.
    pub(crate) fn fprime_theta_dual(&self, theta: &Parameter, u: ArrayView2<f64>, weights: ArrayView2<f64>) -> Parameter {
        let nt = self.disc.nt();
        let nx = self.disc.nx();
        let hx = self.disc.hx();
        let grid = self.disc.grid();
        let mut g = theta.zeros_like();
        for n in 0..nt {
            let w = row(&weights, n);
            let un1 = row(&u, n + 1);
            if theta.active.a {
                stiffness_bilinear_gradient(grid, &w, &un1, 1.0, g.a.as_slice_mut().unwrap());
            }
            if theta.active.c {
                for i in 0..nx {
                    g.c[i] += hx * w[i] * un1[i];
                }
            }
            if theta.active.phi {
                for i in 0..nx {
                    g.phi[[n, i]] = -hx * w[i];
                }
            }
        }
        g
    }

    /// Dual vector in `X*` of `xi -> (F'_theta xi, w)` in `CalUstar x H`,
    /// where `F'_theta xi = (f'_theta xi, A xi)` and `A xi = xi_u0`.
    pub fn ftheta_dual(&self, theta: &Parameter, u: ArrayView2<f64>, w: &ResidualPair) -> Result<Parameter> {
        self.check_state(u)?;
        self.check_parameter(theta)?;
        let ht = self.disc.ht();
        let nt = self.disc.nt();
        let mut weights = Array2::zeros((nt, self.disc.nx()));
        for n in 0..nt {
            let r = self.disc.riesz_solve(&w.pde_part.row(n).to_vec());
            weights.row_mut(n).assign(&(Array1::from(r) * ht));
        }
        let mut g = self.fprime_theta_dual(theta, u, weights.view());
        if theta.active.u0 {
            g.u0 = &w.init_part * self.disc.hx();
        }
        Ok(g)
    }
}
