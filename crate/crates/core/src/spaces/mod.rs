//! Discrete function spaces, inner products and Riesz maps.
//!
//! Dual objects (elements of `U*`, `V*`, `X*`) are stored as coefficient
//! vectors acting through the plain Euclidean pairing. Primal fields are
//! nodal values. Under this convention `D_U` maps a primal `U` field to its
//! dual vector and is an isometry `U -> U*`.

mod grid;
mod operators;
mod vgram;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

pub use grid::{build_grid, SpaceTimeGrid};
pub use operators::{assemble_operators, stiffness_matrix, DiscreteOperators};
pub(crate) use operators::{check_coefficient, stiffness_bilinear_gradient};
pub use vgram::{CgOptions, CgStats, VPreconditioner};

use crate::error::{shape, validation, Error, Result};
use crate::linalg::dot;
use crate::model::Parameter;
use crate::observe::ObservationData;
use crate::par::Execution;
use vgram::VGram;

/// Names of the discrete spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceTag {
    /// `L^2(Omega)`, lumped mass.
    H,
    /// `H^1_0(Omega)` with Gram `D_U`.
    U,
    /// `H^{-1}(Omega)` with Gram `D_U^{-1}` on dual vectors.
    Ustar,
    /// `L^2(0,T; U)` over all `nt + 1` slices.
    CalU,
    /// `L^2(0,T; U*)` over `nt` step slices.
    CalUstar,
    /// `CalU` plus `CalUstar` of the forward difference in time.
    CalV,
    /// Observation space.
    Y,
    /// Parameter space restricted to the active components.
    X,
}

/// Operand for [`Discretization::inner`].
#[derive(Debug, Clone, Copy)]
pub enum Operand<'a> {
    /// A single spatial vector (`H`, `U`, `Ustar`).
    Vector(ArrayView1<'a, f64>),
    /// A stack of time slices (`CalU`, `CalUstar`, `CalV`).
    Field(ArrayView2<'a, f64>),
    Data(&'a ObservationData),
    Param(&'a Parameter),
}

/// Grid, operators and the space-time Gram solver bundled together.
#[derive(Debug, Clone)]
pub struct Discretization {
    grid: SpaceTimeGrid,
    ops: DiscreteOperators,
    vgram: VGram,
    exec: Execution,
    cg: CgOptions,
}

impl Discretization {
    pub fn new(grid: SpaceTimeGrid) -> Result<Self> {
        let ops = DiscreteOperators::assemble(&grid, &vec![1.0; grid.nx], 0.0)?;
        let vgram = VGram::new(&grid, &ops);
        Ok(Self {
            grid,
            ops,
            vgram,
            exec: Execution::default(),
            cg: CgOptions::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_cg_options(mut self, cg: CgOptions) -> Self {
        self.cg = cg;
        self
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    /// Operators for the unit diffusion coefficient.
    pub fn ops(&self) -> &DiscreteOperators {
        &self.ops
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn cg_options(&self) -> &CgOptions {
        &self.cg
    }

    pub fn nx(&self) -> usize {
        self.grid.nx
    }

    pub fn nt(&self) -> usize {
        self.grid.nt
    }

    pub fn hx(&self) -> f64 {
        self.grid.hx
    }

    pub fn ht(&self) -> f64 {
        self.grid.ht
    }

    // ---- single-slice maps -------------------------------------------------

    /// `D_U v`.
    pub fn riesz_apply(&self, v: &[f64]) -> Vec<f64> {
        self.ops.riesz_du.apply(v)
    }

    /// `D_U^{-1} w`.
    pub fn riesz_solve(&self, w: &[f64]) -> Vec<f64> {
        let mut x = w.to_vec();
        self.ops.riesz_factor.solve_in_place(&mut x);
        x
    }

    pub fn mass_apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| x * self.grid.hx).collect()
    }

    pub fn inner_h(&self, x: &[f64], y: &[f64]) -> f64 {
        self.grid.hx * dot(x, y)
    }

    pub fn inner_u(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.riesz_apply(y))
    }

    pub fn inner_ustar(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.riesz_solve(y))
    }

    // ---- space-time --------------------------------------------------------

    fn check_field(&self, u: ArrayView2<f64>, rows: usize, what: &str) -> Result<()> {
        if u.dim() != (rows, self.grid.nx) {
            return Err(shape(format!(
                "{what} has shape {:?}, expected ({rows}, {})",
                u.dim(),
                self.grid.nx
            )));
        }
        Ok(())
    }

    /// `ht * sum_n <x_n, y_n>_U` over however many slices are given.
    pub fn inner_cal_u(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
        let mut s = 0.0;
        for (xr, yr) in x.outer_iter().zip(y.outer_iter()) {
            s += self.inner_u(&xr.to_vec(), &yr.to_vec());
        }
        self.grid.ht * s
    }

    pub fn inner_cal_ustar(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
        let mut s = 0.0;
        for (xr, yr) in x.outer_iter().zip(y.outer_iter()) {
            s += self.inner_ustar(&xr.to_vec(), &yr.to_vec());
        }
        self.grid.ht * s
    }

    /// Forward difference in time as a dual (`U*`) field: `M (u^{n+1} - u^n) / ht`.
    pub fn time_derivative(&self, u: ArrayView2<f64>) -> Array2<f64> {
        let nt = u.nrows().saturating_sub(1);
        let s = self.grid.hx / self.grid.ht;
        Array2::from_shape_fn((nt, u.ncols()), |(n, i)| s * (u[[n + 1, i]] - u[[n, i]]))
    }

    pub fn inner_cal_v(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
        let dx = self.time_derivative(x);
        let dy = self.time_derivative(y);
        self.inner_cal_u(x, y) + self.inner_cal_ustar(dx.view(), dy.view())
    }

    /// `G_V u`, the Gram matrix of `CalV` applied to a state field.
    pub fn v_gram_apply(&self, u: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_field(u, self.grid.nt + 1, "state field")?;
        Ok(self.vgram.apply(&self.ops, u))
    }

    /// Riesz representer in `CalV` of a dual vector `g` (same shape as a
    /// state field): the `u` with `<u, h>_V = g . h` for all `h`.
    pub fn v_representer(&self, g: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.v_representer_with_stats(g).map(|(u, _)| u)
    }

    pub fn v_representer_with_stats(&self, g: ArrayView2<f64>) -> Result<(Array2<f64>, CgStats)> {
        self.vgram.solve(&self.ops, self.exec, g, &self.cg)
    }

    // ---- norms and tags ----------------------------------------------------

    pub fn norm_cal_u(&self, u: ArrayView2<f64>) -> f64 {
        self.inner_cal_u(u, u).max(0.0).sqrt()
    }

    pub fn norm_cal_ustar(&self, u: ArrayView2<f64>) -> f64 {
        self.inner_cal_ustar(u, u).max(0.0).sqrt()
    }

    pub fn norm_cal_v(&self, u: ArrayView2<f64>) -> f64 {
        self.inner_cal_v(u, u).max(0.0).sqrt()
    }

    /// Inner product selected by tag. `Y` needs two [`Operand::Data`]
    /// operands with identical observation specs; `X` needs two
    /// [`Operand::Param`] operands with identical active sets.
    pub fn inner(&self, tag: SpaceTag, x: Operand, y: Operand) -> Result<f64> {
        use Operand::*;
        use SpaceTag::*;
        let nx = self.grid.nx;
        let nt = self.grid.nt;
        match (tag, x, y) {
            (H | U | Ustar, Vector(a), Vector(b)) => {
                if a.len() != nx || b.len() != nx {
                    return Err(shape(format!(
                        "spatial vectors of length {} and {}, expected {nx}",
                        a.len(),
                        b.len()
                    )));
                }
                let (a, b) = (a.to_vec(), b.to_vec());
                Ok(match tag {
                    H => self.inner_h(&a, &b),
                    U => self.inner_u(&a, &b),
                    _ => self.inner_ustar(&a, &b),
                })
            }
            (CalU, Field(a), Field(b)) => {
                self.check_field(a, nt + 1, "first operand")?;
                self.check_field(b, nt + 1, "second operand")?;
                Ok(self.inner_cal_u(a, b))
            }
            (CalUstar, Field(a), Field(b)) => {
                self.check_field(a, nt, "first operand")?;
                self.check_field(b, nt, "second operand")?;
                Ok(self.inner_cal_ustar(a, b))
            }
            (CalV, Field(a), Field(b)) => {
                self.check_field(a, nt + 1, "first operand")?;
                self.check_field(b, nt + 1, "second operand")?;
                Ok(self.inner_cal_v(a, b))
            }
            (Y, Data(a), Data(b)) => a.inner(b, self),
            (X, Param(a), Param(b)) => self.inner_x(a, b),
            (tag, _, _) => Err(validation(format!("operands do not match space {tag:?}"))),
        }
    }

    // ---- parameter space ---------------------------------------------------

    fn check_param(&self, p: &Parameter) -> Result<()> {
        p.check_shape(&self.grid)
    }

    /// `X` inner product over the components active in `x`.
    ///
    /// Component Grams: `a` uses `D_U M^{-1} D_U` (an `H^2`-type norm),
    /// `c` and `u0` use the mass, `phi` uses `L^2(0,T; H^{-1})`.
    pub fn inner_x(&self, x: &Parameter, y: &Parameter) -> Result<f64> {
        self.check_param(x)?;
        self.check_param(y)?;
        if x.active != y.active {
            return Err(validation("parameters have different active sets"));
        }
        let hx = self.grid.hx;
        let mut s = 0.0;
        if x.active.a {
            let da = self.riesz_apply(x.a.as_slice().unwrap());
            let db = self.riesz_apply(y.a.as_slice().unwrap());
            s += dot(&da, &db) / hx;
        }
        if x.active.c {
            s += hx * dot(x.c.as_slice().unwrap(), y.c.as_slice().unwrap());
        }
        if x.active.phi {
            let mut acc = 0.0;
            for (xr, yr) in x.phi.outer_iter().zip(y.phi.outer_iter()) {
                acc += self.inner_ustar(&xr.to_vec(), &yr.to_vec());
            }
            s += self.grid.ht * hx * hx * acc;
        }
        if x.active.u0 {
            s += hx * dot(x.u0.as_slice().unwrap(), y.u0.as_slice().unwrap());
        }
        Ok(s)
    }

    pub fn norm_x(&self, x: &Parameter) -> Result<f64> {
        Ok(self.inner_x(x, x)?.max(0.0).sqrt())
    }

    /// Gram of `X` applied to a primal direction, giving its dual vector.
    pub fn x_gram_apply(&self, x: &Parameter) -> Result<Parameter> {
        self.check_param(x)?;
        let hx = self.grid.hx;
        let mut out = x.zeros_like();
        if x.active.a {
            let da = self.riesz_apply(x.a.as_slice().unwrap());
            let m_inv: Vec<f64> = da.iter().map(|v| v / hx).collect();
            out.a = Array1::from(self.riesz_apply(&m_inv));
        }
        if x.active.c {
            out.c = &x.c * hx;
        }
        if x.active.phi {
            let s = self.grid.ht * hx * hx;
            for (mut o, r) in out.phi.outer_iter_mut().zip(x.phi.outer_iter()) {
                let w = self.riesz_solve(&r.to_vec());
                for (oi, wi) in o.iter_mut().zip(w) {
                    *oi = s * wi;
                }
            }
        }
        if x.active.u0 {
            out.u0 = &x.u0 * hx;
        }
        Ok(out)
    }

    /// Riesz map `X* -> X`: inverse of [`Self::x_gram_apply`].
    ///
    /// Fails if the dual vector has a non-zero inactive component.
    pub fn apply_i_x(&self, g: &Parameter) -> Result<Parameter> {
        self.check_param(g)?;
        g.check_inactive_zero()?;
        let hx = self.grid.hx;
        let mut out = g.zeros_like();
        if g.active.a {
            let w = self.riesz_solve(g.a.as_slice().unwrap());
            let mw: Vec<f64> = w.iter().map(|v| v * hx).collect();
            out.a = Array1::from(self.riesz_solve(&mw));
        }
        if g.active.c {
            out.c = &g.c / hx;
        }
        if g.active.phi {
            let s = 1.0 / (self.grid.ht * hx * hx);
            for (mut o, r) in out.phi.outer_iter_mut().zip(g.phi.outer_iter()) {
                let w = self.riesz_apply(&r.to_vec());
                for (oi, wi) in o.iter_mut().zip(w) {
                    *oi = s * wi;
                }
            }
        }
        if g.active.u0 {
            out.u0 = &g.u0 / hx;
        }
        Ok(out)
    }
}

impl Parameter {
    pub(crate) fn check_inactive_zero(&self) -> Result<()> {
        let nonzero1 = |v: &Array1<f64>| v.iter().any(|x| *x != 0.0);
        if !self.active.a && nonzero1(&self.a) {
            return Err(Error::InactiveComponent("a"));
        }
        if !self.active.c && nonzero1(&self.c) {
            return Err(Error::InactiveComponent("c"));
        }
        if !self.active.phi && self.phi.iter().any(|x| *x != 0.0) {
            return Err(Error::InactiveComponent("phi"));
        }
        if !self.active.u0 && nonzero1(&self.u0) {
            return Err(Error::InactiveComponent("u0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
