//! Estimation of the ledger constants at the initial guess.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ledger::{default_tau, ConstantsLedger, DEFAULT_EPS_SPLIT};
use super::InverseProblem;
use crate::adjoint::s_prime_adjoint;
use crate::diagnostics::{estimate_operator_norm, probe_coercivity, probe_tangential_cone_upper, ProbeConfig, ProbeReport};
use crate::error::{validation, Error, Result};
use crate::lower::{estimate_fprime_norm, LowerConfig};
use crate::model::{Nonlinearity, Parameter};
use crate::observe::observe_adjoint;
use crate::reference::{solve_forward, solve_sensitivity};

/// Smallest tangential-cone constant entered into the ledger. Affine
/// forward maps probe to zero, which the open interval `(0, 1)` excludes.
pub const C_TC_FLOOR: f64 = 0.01;

/// Settings for [`estimate_ledger`]. Every `Option` overrides the
/// corresponding estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LedgerOptions {
    /// Outer step is `step_scale / ||G'(theta0)||^2`.
    pub step_scale: f64,
    pub step: Option<f64>,
    pub power_iters: usize,
    /// `||theta0 - theta_true||`; required when the truth is unknown.
    pub r0: Option<f64>,
    /// `R = r_factor * R0` unless `r` is given.
    pub r_factor: f64,
    pub r: Option<f64>,
    pub c_tc: Option<f64>,
    pub c_coe: Option<f64>,
    /// Lipschitz constant of the adjoint in `(theta, u)`; not probed.
    pub c_grad_fa: f64,
    /// Prior-rule drift budget as a fraction of `R`.
    pub rho_factor: f64,
    pub delta_bar: Option<f64>,
    pub eps_split: f64,
    pub tau: Option<f64>,
    /// Probe settings for the sampled constants.
    pub probe: ProbeConfig,
}

impl Default for LedgerOptions {
    fn default() -> Self {
        Self {
            step_scale: 0.5,
            step: None,
            power_iters: 20,
            r0: None,
            r_factor: 2.0,
            r: None,
            c_tc: None,
            c_coe: None,
            c_grad_fa: 1.0,
            rho_factor: 0.1,
            delta_bar: None,
            eps_split: DEFAULT_EPS_SPLIT,
            tau: None,
            probe: ProbeConfig::default(),
        }
    }
}

/// Power-iteration norms at a parameter (not step-normalised).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperNorms {
    /// `||L S'(theta)||` from `X` to `Y`.
    pub g_prime: f64,
    /// `||S'(theta)||` from `X` to `CalU`.
    pub s_prime: f64,
    /// `||L||` from `CalU` to `Y`.
    pub l_norm: f64,
}

pub fn estimate_upper_norms(problem: &InverseProblem, theta: &Parameter, iters: usize, seed: u64) -> Result<UpperNorms> {
    let model = &problem.model;
    let disc = model.disc();
    let spec = &problem.data.spec;
    let u = solve_forward(model, theta, &problem.solver)?;
    let dim = theta.active_len();
    let x_inner = |a: &[f64], b: &[f64]| {
        disc.inner_x(&theta.direction_from_vec(a), &theta.direction_from_vec(b))
            .unwrap_or(f64::NAN)
    };
    let g = estimate_operator_norm(
        dim,
        |x| {
            let xi = theta.direction_from_vec(x);
            let p = solve_sensitivity(model, theta, u.view(), &xi)?;
            let lp = spec.apply(disc, p.view())?;
            let v = observe_adjoint(disc, lp.view(), spec)?;
            let back = s_prime_adjoint(model, theta, u.view(), v.view())?;
            Ok((spec.norm_values(disc.grid(), lp.view()).powi(2), back.active_vec()))
        },
        x_inner,
        iters,
        seed,
    )?;
    let s = estimate_operator_norm(
        dim,
        |x| {
            let xi = theta.direction_from_vec(x);
            let p = solve_sensitivity(model, theta, u.view(), &xi)?;
            let back = s_prime_adjoint(model, theta, u.view(), p.view())?;
            Ok((disc.norm_cal_u(p.view()).powi(2), back.active_vec()))
        },
        x_inner,
        iters,
        seed,
    )?;
    let shape = (disc.nt() + 1, disc.nx());
    let field = |x: &[f64]| Array2::from_shape_vec(shape, x.to_vec()).expect("shape");
    let l = estimate_operator_norm(
        shape.0 * shape.1,
        |x| {
            let lu = spec.apply(disc, field(x).view())?;
            let back = observe_adjoint(disc, lu.view(), spec)?;
            Ok((
                spec.norm_values(disc.grid(), lu.view()).powi(2),
                back.into_raw_vec_and_offset().0,
            ))
        },
        |a, b| disc.inner_cal_u(field(a).view(), field(b).view()),
        iters,
        seed,
    )?;
    Ok(UpperNorms {
        g_prime: g.norm,
        s_prime: s.norm,
        l_norm: l.norm,
    })
}

/// Second-derivative bound of the reaction over the range of `u`.
fn reaction_curvature(nl: Nonlinearity, u_max: f64) -> f64 {
    match nl {
        Nonlinearity::Zero => 0.0,
        Nonlinearity::LipschitzSin { l_phi } => l_phi,
        Nonlinearity::MonotoneCubic => 6.0 * u_max,
    }
}

/// Estimate every ledger constant at `theta0`.
///
/// `truth` supplies `R0` when known; otherwise `opts.r0` must be set.
/// `delta_max` is the largest noise level the ledger will serve. Returns the
/// ledger and the probe reports it was built from.
pub fn estimate_ledger(
    problem: &InverseProblem,
    theta0: &Parameter,
    truth: Option<&Parameter>,
    lower: &LowerConfig,
    delta_max: f64,
    opts: &LedgerOptions,
) -> Result<(ConstantsLedger, Vec<ProbeReport>)> {
    if !(opts.step_scale > 0.0 && opts.step_scale < 2.0) {
        return Err(validation(format!("step_scale must lie in (0, 2), got {}", opts.step_scale)));
    }
    let model = &problem.model;
    let disc = model.disc();
    let seed = opts.probe.seed;
    let norms = estimate_upper_norms(problem, theta0, opts.power_iters, seed)?;
    let step = match opts.step {
        Some(s) => s,
        None if norms.g_prime > 0.0 => opts.step_scale / norms.g_prime.powi(2),
        None => return Err(Error::Infeasible("forward derivative vanishes at theta0".into())),
    };
    let sq = step.sqrt();
    let m_r_upper = sq * norms.g_prime;
    let m_s = sq * norms.s_prime;

    let mut probes = Vec::new();
    let r0 = match (opts.r0, truth) {
        (Some(r0), _) => r0,
        (None, Some(t)) => disc.norm_x(&theta0.diff(t))?,
        (None, None) => return Err(validation("R0 needs either the truth or an explicit r0")),
    };
    let r = opts.r.unwrap_or(opts.r_factor * r0).max(1e-12);
    let c_tc = match opts.c_tc {
        Some(c) => c,
        None => {
            let probe_cfg = ProbeConfig {
                ball_radius: r0.max(1e-8),
                ..opts.probe
            };
            let rep = probe_tangential_cone_upper(model, &problem.solver, &problem.data.spec, theta0, &probe_cfg)?;
            let c = rep.estimate.max(C_TC_FLOOR);
            probes.push(rep);
            c
        }
    };
    let mu_r_upper = 2.0 * (1.0 - c_tc) - m_r_upper * m_r_upper;
    if !(mu_r_upper > 0.0) {
        return Err(Error::Infeasible(format!(
            "tangential-cone constant {c_tc:.3} leaves no margin for M_R = {m_r_upper:.3}; lower step_scale"
        )));
    }

    let u0 = solve_forward(model, theta0, &problem.solver)?;
    let c_coe = match opts.c_coe {
        Some(c) => c,
        None => {
            let rep = probe_coercivity(model, theta0, u0.view(), &opts.probe)?;
            let c = rep.estimate;
            probes.push(rep);
            c
        }
    };
    let m_r = match lower.m_r {
        Some(m) => m,
        None => estimate_fprime_norm(model, theta0, u0.view(), lower.power_iters, seed)?.norm,
    };
    let mu_r = 2.0 - lower.step_scale;
    let u_max = u0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let delta_bar = opts.delta_bar.unwrap_or(delta_max).max(0.0);
    let gamma_bar = lower.gamma0;
    let d_bound = ConstantsLedger::d_formula(opts.c_grad_fa, norms.l_norm, sq * delta_bar, m_r_upper, r, gamma_bar);
    let mut ledger = ConstantsLedger {
        step,
        m_s,
        m_r_upper,
        mu_r_upper,
        k_r: 1.0 + c_tc,
        c_tc,
        tau: 0.0,
        r,
        r0,
        l_norm: norms.l_norm,
        m_r,
        mu_r,
        c_coe,
        alpha: lower.alpha,
        c_fu: c_coe,
        l_grad_f: reaction_curvature(model.nonlinearity(), u_max),
        c_grad_fa: opts.c_grad_fa,
        d_bound,
        q: lower.q,
        gamma0: lower.gamma0,
        rho: opts.rho_factor * r,
        gamma_bar,
        delta_bar,
        eps_split: opts.eps_split,
    };
    ledger.tau = match opts.tau {
        Some(t) => t,
        None => default_tau(&ledger)?,
    };
    ledger.validate()?;
    Ok((ledger, probes))
}
