//! Inner Landweber iteration on the all-at-once state residual:
//! `u_{k+1} = u_k - mu F'(u_k)* F(u_k)`, adjoint taken in `CalV`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{estimate_operator_norm, NormEstimate};
use crate::error::{validation, Error, Result};
use crate::model::{Parameter, PdeModel, StateField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerMode {
    /// Run exactly `k_max` steps.
    FixedK,
    /// Stop once `c_coe * ||F(u_k)|| <= eps_target`, at most `k_max` steps.
    EpsilonTarget,
}

/// Settings of the inner iteration and of its prior step-count rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LowerConfig {
    pub mode: LowerMode,
    pub k_max: usize,
    pub eps_target: f64,
    /// Step is `step_scale / M_r^2`.
    pub step_scale: f64,
    /// Known bound on `||F'||`; estimated by power iteration when absent.
    pub m_r: Option<f64>,
    /// Coercivity constant used by the error surrogate.
    pub c_coe: f64,
    /// Constant `C` of the rate `||u_k - u*|| <= C k^{-1/(2 alpha)}`.
    pub rate_const: f64,
    pub alpha: f64,
    pub gamma0: f64,
    pub q: f64,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for LowerConfig {
    fn default() -> Self {
        Self {
            mode: LowerMode::EpsilonTarget,
            k_max: 20_000,
            eps_target: 1e-6,
            step_scale: 1.0,
            m_r: None,
            c_coe: 1.0,
            rate_const: 1.0,
            alpha: 1.0,
            gamma0: 1e-3,
            q: 1.0,
            power_iters: 30,
            seed: 0,
        }
    }
}

impl LowerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_scale > 0.0 && self.step_scale < 2.0) {
            return Err(validation(format!(
                "lower step_scale must lie in (0, 2), got {}",
                self.step_scale
            )));
        }
        if let Some(m) = self.m_r {
            if !(m > 0.0 && m.is_finite()) {
                return Err(validation("m_r must be positive"));
            }
        }
        if !(self.c_coe > 0.0) || !(self.rate_const > 0.0) || !(self.alpha > 0.0) {
            return Err(validation("c_coe, rate_const and alpha must be positive"));
        }
        if !(self.gamma0 > 0.0) || !(self.q >= 1.0) {
            return Err(validation("gamma0 must be positive and q >= 1"));
        }
        if self.mode == LowerMode::EpsilonTarget && !(self.eps_target >= 0.0) {
            return Err(validation("eps_target must be >= 0"));
        }
        Ok(())
    }
}

/// Result of one inner run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerReport {
    pub u_final: StateField,
    /// `||F(u_k)||` for `k = 0..=steps_taken`.
    pub residual_history: Vec<f64>,
    /// `||u_k - u*||_{CalU}` when an oracle state was supplied.
    pub error_history: Option<Vec<f64>>,
    /// `||u_k - u*||_{CalV}` when an oracle state was supplied.
    pub error_history_v: Option<Vec<f64>>,
    pub steps_taken: usize,
    /// `c_coe * ||F(u_final)||`.
    pub eps_estimate: f64,
    pub step_size: f64,
    pub m_r: f64,
}

/// Power-iteration estimate of `||F'(theta, u)||` from `CalV` to `CalUstar x H`.
pub fn estimate_fprime_norm(
    model: &PdeModel,
    theta: &Parameter,
    u: ArrayView2<f64>,
    iters: usize,
    seed: u64,
) -> Result<NormEstimate> {
    let disc = model.disc();
    let shape = (disc.nt() + 1, disc.nx());
    let to_field = |x: &[f64]| Array2::from_shape_vec(shape, x.to_vec()).expect("shape");
    estimate_operator_norm(
        shape.0 * shape.1,
        |x| {
            let h = to_field(x);
            let fh = model.apply_fprime(theta, u, h.view())?;
            let back = model.apply_fprime_adjoint(theta, u, &fh)?;
            Ok((model.residual_inner(&fh, &fh), back.into_raw_vec_and_offset().0))
        },
        |a, b| disc.inner_cal_v(to_field(a).view(), to_field(b).view()),
        iters,
        seed,
    )
}

/// Inner Landweber iteration.
pub fn lower_landweber(
    model: &PdeModel,
    theta: &Parameter,
    u_init: ArrayView2<f64>,
    cfg: &LowerConfig,
    oracle: Option<ArrayView2<f64>>,
) -> Result<LowerReport> {
    cfg.validate()?;
    model.check_state(u_init)?;
    if let Some(o) = oracle {
        model.check_state(o)?;
    }
    let disc = model.disc();
    let m_r = match cfg.m_r {
        Some(m) => m,
        None => estimate_fprime_norm(model, theta, u_init, cfg.power_iters, cfg.seed)?.norm,
    };
    let mu = cfg.step_scale / (m_r * m_r);
    let mut u = u_init.to_owned();
    let mut residual_history = Vec::new();
    let mut err_u = oracle.map(|_| Vec::new());
    let mut err_v = oracle.map(|_| Vec::new());
    let mut k = 0;
    loop {
        let r = model.residual(theta, u.view())?;
        let rn = model.residual_norm(&r);
        if !rn.is_finite() {
            return Err(Error::LowerDivergence {
                step: k,
                reason: "non-finite residual".into(),
            });
        }
        if let Some(first) = residual_history.first() {
            if rn > 10.0 * first {
                return Err(Error::LowerDivergence {
                    step: k,
                    reason: format!("residual grew from {first:.3e} to {rn:.3e}"),
                });
            }
        }
        residual_history.push(rn);
        if let Some(o) = oracle {
            let e = &u - &o;
            err_u.as_mut().unwrap().push(disc.norm_cal_u(e.view()));
            err_v.as_mut().unwrap().push(disc.norm_cal_v(e.view()));
        }
        let done = match cfg.mode {
            LowerMode::FixedK => k >= cfg.k_max,
            LowerMode::EpsilonTarget => cfg.c_coe * rn <= cfg.eps_target || k >= cfg.k_max,
        };
        if done {
            break;
        }
        let step = model.apply_fprime_adjoint(theta, u.view(), &r)?;
        u.scaled_add(-mu, &step);
        k += 1;
    }
    let eps_estimate = cfg.c_coe * residual_history[k];
    Ok(LowerReport {
        u_final: u,
        residual_history,
        error_history: err_u,
        error_history_v: err_v,
        steps_taken: k,
        eps_estimate,
        step_size: mu,
        m_r,
    })
}

/// Prior step count `K(j) = ceil((C q^j / (gamma0 delta))^{2 alpha})`: the
/// smallest `K` with `C K^{-1/(2 alpha)} <= delta gamma0 q^{-j}`.
/// `delta = 0` returns the cap `k_max`.
pub fn lower_stop_index(j: usize, delta: f64, cfg: &LowerConfig) -> Result<usize> {
    if !(delta >= 0.0) {
        return Err(validation(format!("noise level must be >= 0, got {delta}")));
    }
    if !(cfg.gamma0 > 0.0) || !(cfg.q >= 1.0) || !(cfg.alpha > 0.0) || !(cfg.rate_const > 0.0) {
        return Err(validation("gamma0, alpha, rate_const must be positive and q >= 1"));
    }
    if delta == 0.0 {
        return Ok(cfg.k_max);
    }
    let target = delta * cfg.gamma0 / cfg.q.powi(j as i32);
    let bound = |k: f64| cfg.rate_const * k.powf(-1.0 / (2.0 * cfg.alpha));
    let raw = (cfg.rate_const / target).powf(2.0 * cfg.alpha);
    if !raw.is_finite() || raw >= cfg.k_max as f64 {
        return Ok(cfg.k_max);
    }
    let mut k = raw.ceil().max(1.0);
    // Guard the closed form against rounding in either direction.
    while k > 1.0 && bound(k - 1.0) <= target {
        k -= 1.0;
    }
    while bound(k) > target {
        k += 1.0;
    }
    Ok((k as usize).min(cfg.k_max))
}

/// `c_coe * ||F(theta, u)||`, an a-posteriori bound for `||u - S(theta)||_U`.
pub fn eps_surrogate(model: &PdeModel, theta: &Parameter, u: ArrayView2<f64>, c_coe: f64) -> Result<f64> {
    let r = model.residual(theta, u)?;
    Ok(c_coe * model.residual_norm(&r))
}
