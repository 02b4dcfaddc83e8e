//! Adjoint of the linearised parameter-to-state map.
//!
//! The backward equation `-z_t + f'_u(u)* z = D_U v`, `z(T) = 0`, is
//! discretised by backward Euler in reversed time with both the linearisation
//! and the data taken at the right end of each step (matching the implicit
//! placement of the forward residual). Then
//!
//! ```text
//! S'(theta)* v = I_X( -ht sum_n f'_theta(u^{n+1})* z^n + A* z^0 )
//! ```
//!
//! with a left-endpoint rule for the parameter integral. Compared with the
//! exact transpose of the discrete sensitivity, the only gap is the dropped
//! `ht D_U v^0` term in the initial-state component, which is `O(ht)` for
//! data that are bounded in time and zero when `v^0 = 0`.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{shape, Error, Result};
use crate::model::{row, Parameter, PdeModel, StateField};

/// Adjoint state `z`, `nt + 1` slices with `z^{nt} = 0`.
pub type AdjointField = Array2<f64>;

pub fn solve_adjoint(model: &PdeModel, theta: &Parameter, u_base: ArrayView2<f64>, v: ArrayView2<f64>) -> Result<AdjointField> {
    model.check_state(u_base)?;
    let disc = model.disc();
    let (nt, nx) = (disc.nt(), disc.nx());
    if v.dim() != (nt + 1, nx) {
        return Err(shape(format!("adjoint source has shape {:?}", v.dim())));
    }
    let stiff = model.stiffness(theta)?;
    let s = disc.hx() / disc.ht();
    let mut z = Array2::zeros((nt + 1, nx));
    for n in (0..nt).rev() {
        let mut jac = model.slice_jacobian(&stiff, theta, &row(&u_base, n + 1));
        jac.add_diagonal(&vec![s; nx]);
        let dv = disc.riesz_apply(&row(&v, n + 1));
        let rhs: Vec<f64> = (0..nx).map(|i| s * z[[n + 1, i]] + dv[i]).collect();
        let sol = jac.solve(&rhs).ok_or(Error::Newton {
            step: n,
            residual: f64::NAN,
            iterations: 0,
        })?;
        z.row_mut(n).assign(&Array1::from(sol));
    }
    Ok(z)
}

/// Dual vector (in `X*`) whose Riesz representative is `S'(theta)* v`.
pub fn s_prime_adjoint_dual(model: &PdeModel, theta: &Parameter, u_base: ArrayView2<f64>, z: ArrayView2<f64>) -> Parameter {
    let disc = model.disc();
    let nt = disc.nt();
    let weights = z.slice(ndarray::s![0..nt, ..]).mapv(|v| -disc.ht() * v);
    let mut g = model.fprime_theta_dual(theta, u_base, weights.view());
    if theta.active.u0 {
        g.u0 = z.row(0).mapv(|v| disc.hx() * v);
    }
    g
}

/// `S'(theta)* v` evaluated around the state `u_base` (exact or approximate).
pub fn s_prime_adjoint(model: &PdeModel, theta: &Parameter, u_base: ArrayView2<f64>, v: ArrayView2<f64>) -> Result<Parameter> {
    let z = solve_adjoint(model, theta, u_base, v)?;
    let g = s_prime_adjoint_dual(model, theta, u_base, z.view());
    model.disc().apply_i_x(&g)
}

/// Like [`s_prime_adjoint`], also returning the adjoint state.
pub fn gradient_with_state(
    model: &PdeModel,
    theta: &Parameter,
    u_base: ArrayView2<f64>,
    v: ArrayView2<f64>,
) -> Result<(Parameter, StateField)> {
    let z = solve_adjoint(model, theta, u_base, v)?;
    let g = s_prime_adjoint_dual(model, theta, u_base, z.view());
    Ok((model.disc().apply_i_x(&g)?, z))
}
