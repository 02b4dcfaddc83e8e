//! Structural constants and the stopping rules built from them.
//!
//! All constants refer to the step-normalised problem: iterating with step
//! `mu` on `G = L S` is unit-step Landweber on `sqrt(mu) G` with data
//! `sqrt(mu) y`, so `M_R = sqrt(mu) ||G'||` and every noise level entering
//! the prior rule is `sqrt(mu) delta`. The discrepancy test itself is scale
//! free.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// Young split used in `Gamma` unless overridden.
pub const DEFAULT_EPS_SPLIT: f64 = std::f64::consts::SQRT_2 - 1.0;

/// Safety factor of the default discrepancy constant over `Gamma(0)`.
pub const TAU_FACTOR: f64 = 1.2;

/// Hard cap on the drift search in [`prior_stop_index`].
const MAX_PRIOR_INDEX: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    /// Outer step `mu`.
    pub step: f64,
    /// Bound on `||S'||` (normalised).
    pub m_s: f64,
    /// Bound on `||G'||` (normalised).
    pub m_r_upper: f64,
    pub mu_r_upper: f64,
    pub k_r: f64,
    pub c_tc: f64,
    pub tau: f64,
    pub r: f64,
    pub r0: f64,
    pub l_norm: f64,
    /// Lower-level derivative norm `||F'||` and its normalised margin.
    pub m_r: f64,
    pub mu_r: f64,
    pub c_coe: f64,
    pub alpha: f64,
    pub c_fu: f64,
    pub l_grad_f: f64,
    pub c_grad_fa: f64,
    pub d_bound: f64,
    pub q: f64,
    pub gamma0: f64,
    /// Prior-rule drift budget.
    pub rho: f64,
    pub gamma_bar: f64,
    pub delta_bar: f64,
    pub eps_split: f64,
}

impl ConstantsLedger {
    /// Check the relations every ledger must satisfy.
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("step", self.step),
            ("m_s", self.m_s),
            ("m_r_upper", self.m_r_upper),
            ("tau", self.tau),
            ("r", self.r),
            ("l_norm", self.l_norm),
            ("c_coe", self.c_coe),
            ("q", self.q),
            ("gamma0", self.gamma0),
            ("rho", self.rho),
            ("eps_split", self.eps_split),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(validation(format!("ledger constant {name} must be positive, got {v}")));
            }
        }
        if !(self.c_tc > 0.0 && self.c_tc < 1.0) {
            return Err(validation(format!("C_tc must lie in (0, 1), got {}", self.c_tc)));
        }
        if (self.k_r - (1.0 + self.c_tc)).abs() > 1e-12 {
            return Err(validation("K_R must equal 1 + C_tc"));
        }
        if !(self.mu_r_upper > 0.0) || self.m_r_upper.powi(2) + self.mu_r_upper >= 2.0 {
            return Err(validation(format!(
                "need mu_R > 0 and M_R^2 + mu_R < 2, got M_R = {}, mu_R = {}",
                self.m_r_upper, self.mu_r_upper
            )));
        }
        if !(self.r0 >= 0.0 && self.r0 < self.r) {
            return Err(validation(format!("need 0 <= R0 < R, got R0 = {}, R = {}", self.r0, self.r)));
        }
        if !(self.q >= 1.0) || !(self.alpha >= 1.0) {
            return Err(validation("need q >= 1 and alpha >= 1"));
        }
        if !(self.gamma_bar >= 0.0) || !(self.delta_bar >= 0.0) || !(self.d_bound >= 0.0) {
            return Err(validation("gamma_bar, delta_bar and D must be >= 0"));
        }
        let g0 = gamma_posterior(self, self.gamma0, self.eps_split)?;
        if !(self.tau > g0) {
            return Err(validation(format!("tau = {} must exceed Gamma(0) = {g0}", self.tau)));
        }
        Ok(())
    }

    /// `gamma(j) = gamma0 / q^j`.
    pub fn gamma(&self, j: usize) -> f64 {
        self.gamma0 / self.q.powi(j as i32)
    }

    /// `D = C_{grad f,A} ||L|| (delta_bar + M_R R + ||L|| delta_bar gamma_bar)`.
    pub fn d_formula(c_grad_fa: f64, l_norm: f64, delta_bar: f64, m_r_upper: f64, r: f64, gamma_bar: f64) -> f64 {
        c_grad_fa * l_norm * (delta_bar + m_r_upper * r + l_norm * delta_bar * gamma_bar)
    }
}

/// Residual factor `Gamma` of the posterior rule for a lower-level precision
/// factor `gamma` and Young split `eps`.
///
/// Fails with [`Error::Infeasible`] when the denominator is not positive;
/// the caller must then shrink `gamma` or adjust `eps`.
pub fn gamma_posterior(ledger: &ConstantsLedger, gamma: f64, eps: f64) -> Result<f64> {
    gamma_posterior_raw(ledger.m_r_upper, ledger.c_tc, ledger.k_r, ledger.l_norm, gamma, eps)
}

/// [`gamma_posterior`] on explicit constants. `gamma = 0` drops the
/// `(1 + 1/eps)` term, which makes the `eps -> 0` limit available as `eps = 0`.
pub fn gamma_posterior_raw(m_r: f64, c_tc: f64, k_r: f64, l_norm: f64, gamma: f64, eps: f64) -> Result<f64> {
    if !(gamma >= 0.0) || !(eps >= 0.0) || (gamma > 0.0 && eps == 0.0) {
        return Err(validation(format!(
            "need gamma >= 0 and eps > 0 (eps = 0 only with gamma = 0), got {gamma}, {eps}"
        )));
    }
    let num = 2.0 * (1.0 + c_tc + l_norm * k_r * gamma);
    let mut den = 2.0 - (1.0 + eps) * m_r * m_r - 2.0 * c_tc;
    if gamma > 0.0 {
        den -= l_norm * (2.0 * k_r * gamma + m_r * m_r * l_norm * gamma * gamma) * (1.0 + 1.0 / eps);
    }
    if !(den > 0.0) {
        return Err(Error::Infeasible(format!(
            "posterior rule infeasible for these constants (denominator {den:.4e}); shrink gamma or eps"
        )));
    }
    Ok(num / den)
}

/// `residual <= tau delta`.
pub fn posterior_stop_check(residual_norm: f64, delta: f64, tau: f64) -> bool {
    residual_norm <= tau * delta
}

/// Default discrepancy constant `1.2 Gamma(0)`.
pub fn default_tau(ledger: &ConstantsLedger) -> Result<f64> {
    Ok(TAU_FACTOR * gamma_posterior(ledger, ledger.gamma0, ledger.eps_split)?)
}

/// Noise-propagation factor `Gamma^(j)`: bound on the distance between the
/// bi-level noisy iterate and the exact single-level iterate, per unit of
/// normalised noise.
pub fn gamma_hat_prior(j: usize, ledger: &ConstantsLedger) -> f64 {
    gamma_hat_raw(j, ledger.m_r_upper, ledger.m_s, ledger.d_bound, ledger.l_norm, ledger.q)
}

pub fn gamma_hat_raw(j: usize, m_r: f64, m_s: f64, d: f64, l_norm: f64, q: f64) -> f64 {
    let b = 1.0 + m_r * m_r + (1.0 + m_s) * d;
    let jf = j as f64;
    let bj = b.powi(j as i32);
    let first = if (b - 1.0).abs() < 1e-12 {
        m_r * jf
    } else {
        m_r * (bj - 1.0) / (b - 1.0)
    };
    let inv_q = 1.0 / q;
    let geo = if (b - inv_q).abs() < 1e-12 {
        if j == 0 {
            0.0
        } else {
            jf * b.powi(j as i32 - 1)
        }
    } else {
        (bj - inv_q.powi(j as i32)) / (b - inv_q)
    };
    first + (m_r * l_norm + d) / q * geo
}

/// Outcome of the a-priori index selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorIndex {
    pub j_star: usize,
    pub j_budget: usize,
    pub j_drift: usize,
    /// The budget was already exhausted at `j = 0`.
    pub zero_budget: bool,
}

/// A-priori stopping index `min(j_budget, j_drift)`.
pub fn prior_stop_index(delta: f64, ledger: &ConstantsLedger) -> Result<PriorIndex> {
    if !(delta > 0.0) {
        return Err(validation(format!("prior rule needs delta > 0, got {delta}")));
    }
    if !(ledger.r0 < ledger.r) {
        return Err(validation("prior rule needs R0 < R"));
    }
    let d = ledger.step.sqrt() * delta;
    let kr2 = ledger.k_r * ledger.k_r / ledger.mu_r_upper;
    let mr2 = ledger.m_r_upper * ledger.m_r_upper;
    let lg2 = (ledger.l_norm * ledger.gamma_bar).powi(2);
    let per_step = d * d * (kr2 + 5.0 * mr2 + 2.0 * kr2 * lg2 + 3.5 * mr2 * lg2);
    let budget = (ledger.r * ledger.r - ledger.r0 * ledger.r0) / per_step;
    let j_budget = if budget.is_finite() {
        budget.floor().min(MAX_PRIOR_INDEX as f64) as usize
    } else {
        MAX_PRIOR_INDEX
    };
    let mut j_drift = 0;
    while j_drift < MAX_PRIOR_INDEX && d * gamma_hat_prior(j_drift + 1, ledger) <= ledger.rho {
        j_drift += 1;
    }
    let j_star = j_budget.min(j_drift);
    Ok(PriorIndex {
        j_star,
        j_budget,
        j_drift,
        zero_budget: j_budget == 0,
    })
}

#[cfg(test)]
mod tests;
