//! Dual-pairing and finite-difference checks of the derivative code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampling::{smooth_profile, smooth_state};
use crate::error::{validation, Result};
use crate::model::{Parameter, PdeModel, ResidualPair};
use crate::par::map_range;
use crate::reference::solve_forward;
use crate::upper::InverseProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointCheck {
    /// `|<F'(u)h, w> - <h, F'(u)* w>_V| / max(|lhs|, |rhs|)` per triple.
    pub gaps: Vec<f64>,
    pub max_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Check `<F'(u)h, w> = <h, F'(u)* w>_CalV` on `n_triples` random
/// `(u, h, w)`, with `u` a smooth perturbation of `u_centre`.
pub fn check_state_adjoint(
    model: &PdeModel,
    theta: &Parameter,
    u_centre: ndarray::ArrayView2<f64>,
    n_triples: usize,
    seed: u64,
    tolerance: f64,
) -> Result<AdjointCheck> {
    if n_triples == 0 {
        return Err(validation("adjoint check needs at least one triple"));
    }
    model.check_state(u_centre)?;
    let disc = model.disc();
    let grid = *disc.grid();
    let gaps = map_range(disc.execution(), n_triples, |k| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64 + 1);
        let u = &u_centre + &(smooth_state(&grid, &mut rng) * rng.gen_range(0.1..1.0));
        let h = smooth_state(&grid, &mut rng);
        let pde = smooth_state(&grid, &mut rng);
        let w = ResidualPair {
            pde_part: pde.slice(ndarray::s![1.., ..]).to_owned(),
            init_part: smooth_profile(&grid, &mut rng),
        };
        let lhs = model.residual_inner(&model.apply_fprime(theta, u.view(), h.view())?, &w);
        let adj = model.apply_fprime_adjoint(theta, u.view(), &w)?;
        let rhs = disc.inner_cal_v(h.view(), adj.view());
        Ok((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    Ok(AdjointCheck {
        gaps,
        max_gap,
        tolerance,
        pass: max_gap <= tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    /// Central difference of `1/2 ||L S(theta) - y||_Y^2` along `xi`.
    pub fd: f64,
    /// `<S'(theta)* L*(L S(theta) - y), xi>_X`.
    pub adjoint: f64,
    pub rel_error: f64,
}

fn misfit(problem: &InverseProblem, theta: &Parameter) -> Result<f64> {
    let u = solve_forward(&problem.model, theta, &problem.solver)?;
    Ok(0.5 * problem.data_residual(u.view())?.1.powi(2))
}

/// Compare the adjoint gradient with a central difference of step `h` along
/// `xi` (normalised to unit `X` norm).
pub fn check_gradient(problem: &InverseProblem, theta: &Parameter, xi: &Parameter, h: f64) -> Result<GradientCheck> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(validation("finite-difference step must be positive"));
    }
    let disc = problem.model.disc();
    let n = disc.norm_x(xi)?;
    if n == 0.0 {
        return Err(validation("direction has zero X norm"));
    }
    let xi = xi.scaled(1.0 / n);
    let u = solve_forward(&problem.model, theta, &problem.solver)?;
    let (r, _) = problem.data_residual(u.view())?;
    let g = problem.gradient(theta, u.view(), r.view())?;
    let adjoint = disc.inner_x(&g, &xi)?;
    let mut tp = theta.clone();
    tp.axpy_active(h, &xi);
    let mut tm = theta.clone();
    tm.axpy_active(-h, &xi);
    let fd = (misfit(problem, &tp)? - misfit(problem, &tm)?) / (2.0 * h);
    Ok(GradientCheck {
        fd,
        adjoint,
        rel_error: (fd - adjoint).abs() / fd.abs().max(f64::MIN_POSITIVE),
    })
}
