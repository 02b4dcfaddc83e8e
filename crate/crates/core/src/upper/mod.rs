//! Outer Landweber iteration on `G = L S`, in single-level form (exact state
//! solves) and bi-level form (state replaced by the inner iteration), with
//! the a-posteriori and a-priori stopping rules.

mod constants;
pub mod ledger;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use constants::{estimate_ledger, estimate_upper_norms, LedgerOptions, UpperNorms};
pub use ledger::{
    default_tau, gamma_hat_prior, gamma_hat_raw, gamma_posterior, gamma_posterior_raw, posterior_stop_check, prior_stop_index,
    ConstantsLedger, PriorIndex, DEFAULT_EPS_SPLIT, TAU_FACTOR,
};

use crate::adjoint::s_prime_adjoint;
use crate::error::{validation, Error, Result};
use crate::lower::{lower_landweber, lower_stop_index, LowerConfig, LowerMode};
use crate::model::{Parameter, PdeModel, StateField};
use crate::observe::{add_noise, observe_adjoint, ObservationData};
use crate::par::{map_range, Execution};
use crate::reference::{solve_forward, SolverConfig};

/// Model, oracle solver settings and (noisy) data.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    pub model: PdeModel,
    pub solver: SolverConfig,
    pub data: ObservationData,
}

impl InverseProblem {
    pub fn new(model: PdeModel, solver: SolverConfig, data: ObservationData) -> Result<Self> {
        solver.validate()?;
        let grid = *model.disc().grid();
        data.spec.validate(&grid)?;
        if data.values.dim() != data.spec.data_shape(&grid) {
            return Err(validation(format!(
                "data has shape {:?}, observation expects {:?}",
                data.values.dim(),
                data.spec.data_shape(&grid)
            )));
        }
        Ok(Self { model, solver, data })
    }

    /// Same problem with different data.
    pub fn with_data(&self, data: ObservationData) -> Result<Self> {
        Self::new(self.model.clone(), self.solver, data)
    }

    /// `L u - y` and its `Y` norm.
    pub fn data_residual(&self, u: ArrayView2<f64>) -> Result<(Array2<f64>, f64)> {
        let disc = self.model.disc();
        let mut r = self.data.spec.apply(disc, u)?;
        r -= &self.data.values;
        let n = self.data.spec.norm_values(disc.grid(), r.view());
        Ok((r, n))
    }

    /// `S'(theta)* L* r` around the state `u`.
    pub fn gradient(&self, theta: &Parameter, u: ArrayView2<f64>, r: ArrayView2<f64>) -> Result<Parameter> {
        let disc = self.model.disc();
        let v = observe_adjoint(disc, r, &self.data.spec)?;
        s_prime_adjoint(&self.model, theta, u, v.view())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    Posterior,
    Prior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    PosteriorDiscrepancy,
    PriorIndex,
    MaxIter,
    Divergence,
}

/// Initial state of each inner run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerStart {
    /// Continue from the previous outer step's final state.
    #[default]
    Warm,
    /// Start every inner run from the initial value broadcast in time.
    Cold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpperConfig {
    pub rule: StopRule,
    pub max_iter: usize,
    pub lower: LowerConfig,
    pub start: LowerStart,
    /// Keep every outer iterate in the report.
    pub record_trajectory: bool,
}

impl Default for UpperConfig {
    fn default() -> Self {
        Self {
            rule: StopRule::Posterior,
            max_iter: 2000,
            lower: LowerConfig::default(),
            start: LowerStart::Warm,
            record_trajectory: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperReport {
    pub theta_final: Parameter,
    /// `||theta_j||_X`.
    pub theta_norms: Vec<f64>,
    /// `||theta_j - theta_true||_X`, when the truth is known.
    pub error_history: Option<Vec<f64>>,
    /// `||L u_j - y_delta||_Y` with `u_j` the state used at step `j`.
    pub residual_history: Vec<f64>,
    /// Inner steps used at each `j` (0 for exact solves).
    pub lower_steps: Vec<usize>,
    /// Inner cap `K(j)` at each `j` (0 for exact solves).
    pub lower_caps: Vec<usize>,
    /// Final inner residual `||F(u_j)||` at each `j`.
    pub lower_residuals: Vec<f64>,
    pub stop_reason: StopReason,
    /// Index of `theta_final`.
    pub stop_index: usize,
    pub delta: f64,
    pub tau: f64,
    pub step: f64,
    pub prior_index: Option<PriorIndex>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trajectory: Vec<Parameter>,
}

impl UpperReport {
    pub fn total_lower_steps(&self) -> usize {
        self.lower_steps.iter().sum()
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_error(&self) -> Option<f64> {
        self.error_history.as_ref().and_then(|e| e.last().copied())
    }
}

/// Multiplier on `R` beyond which the outer iteration is declared divergent.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

enum StateSource<'a> {
    Exact,
    Lower(&'a LowerConfig),
}

/// Outer Landweber with exact state solves.
pub fn single_level_landweber(
    problem: &InverseProblem,
    theta0: &Parameter,
    ledger: &ConstantsLedger,
    cfg: &UpperConfig,
    truth: Option<&Parameter>,
) -> Result<UpperReport> {
    run(problem, theta0, ledger, cfg, truth, StateSource::Exact)
}

/// Outer Landweber whose states come from the inner iteration, stopped at
/// `K(j)` or once the surrogate error drops below `delta gamma(j)`.
pub fn bilevel_landweber(
    problem: &InverseProblem,
    theta0: &Parameter,
    ledger: &ConstantsLedger,
    cfg: &UpperConfig,
    truth: Option<&Parameter>,
) -> Result<UpperReport> {
    cfg.lower.validate()?;
    run(problem, theta0, ledger, cfg, truth, StateSource::Lower(&cfg.lower))
}

fn broadcast_initial(theta: &Parameter, nt: usize) -> StateField {
    let nx = theta.u0.len();
    Array2::from_shape_fn((nt + 1, nx), |(_, i)| theta.u0[i])
}

fn run(
    problem: &InverseProblem,
    theta0: &Parameter,
    ledger: &ConstantsLedger,
    cfg: &UpperConfig,
    truth: Option<&Parameter>,
    source: StateSource,
) -> Result<UpperReport> {
    let model = &problem.model;
    let disc = model.disc();
    model.check_parameter(theta0)?;
    if theta0.active.is_empty() {
        return Err(validation("no active parameter component"));
    }
    if !(ledger.step > 0.0 && ledger.tau > 0.0 && ledger.r > 0.0) {
        return Err(validation("ledger needs positive step, tau and R"));
    }
    let delta = problem.data.delta;
    let prior_index = match cfg.rule {
        StopRule::Prior => Some(prior_stop_index(delta, ledger)?),
        StopRule::Posterior => None,
    };
    let mut theta = theta0.clone();
    let mut rep = UpperReport {
        theta_final: theta0.clone(),
        theta_norms: Vec::new(),
        error_history: truth.map(|_| Vec::new()),
        residual_history: Vec::new(),
        lower_steps: Vec::new(),
        lower_caps: Vec::new(),
        lower_residuals: Vec::new(),
        stop_reason: StopReason::MaxIter,
        stop_index: 0,
        delta,
        tau: ledger.tau,
        step: ledger.step,
        prior_index,
        trajectory: Vec::new(),
    };
    let mut warm: Option<StateField> = None;
    let mut j = 0;
    loop {
        if j > 0 && disc.norm_x(&theta.diff(theta0))? > DIVERGENCE_FACTOR * ledger.r {
            rep.stop_reason = StopReason::Divergence;
            break;
        }
        rep.theta_norms.push(disc.norm_x(&theta)?);
        if let (Some(t), Some(e)) = (truth, rep.error_history.as_mut()) {
            e.push(disc.norm_x(&theta.diff(t))?);
        }
        if cfg.record_trajectory {
            rep.trajectory.push(theta.clone());
        }
        let wrap = |e: Error| Error::Upper { j, source: Box::new(e) };
        let u = match source {
            StateSource::Exact => {
                let u = solve_forward(model, &theta, &problem.solver).map_err(wrap)?;
                rep.lower_steps.push(0);
                rep.lower_caps.push(0);
                let r = model.residual(&theta, u.view()).map_err(wrap)?;
                rep.lower_residuals.push(model.residual_norm(&r));
                u
            }
            StateSource::Lower(lcfg) => {
                let init = match (cfg.start, warm.take()) {
                    (LowerStart::Warm, Some(u)) => u,
                    _ => broadcast_initial(&theta, disc.nt()),
                };
                let cap = lower_stop_index(j, delta, lcfg).map_err(wrap)?;
                let inner = LowerConfig {
                    k_max: cap,
                    eps_target: if delta > 0.0 {
                        delta * ledger.gamma(j)
                    } else {
                        lcfg.eps_target
                    },
                    c_coe: ledger.c_coe,
                    m_r: lcfg.m_r.or(Some(ledger.m_r)),
                    ..lcfg.clone()
                };
                let out = lower_landweber(model, &theta, init.view(), &inner, None).map_err(wrap)?;
                rep.lower_steps.push(out.steps_taken);
                rep.lower_caps
                    .push(if inner.mode == LowerMode::FixedK { inner.k_max } else { cap });
                rep.lower_residuals.push(out.residual_history[out.steps_taken]);
                out.u_final
            }
        };
        let (r, res) = problem.data_residual(u.view()).map_err(wrap)?;
        rep.residual_history.push(res);
        let stop = match (cfg.rule, prior_index) {
            (StopRule::Posterior, _) if posterior_stop_check(res, delta, ledger.tau) => Some(StopReason::PosteriorDiscrepancy),
            (StopRule::Prior, Some(p)) if j >= p.j_star => Some(StopReason::PriorIndex),
            _ if j >= cfg.max_iter => Some(StopReason::MaxIter),
            _ => None,
        };
        if let Some(reason) = stop {
            rep.stop_reason = reason;
            break;
        }
        let g = problem.gradient(&theta, u.view(), r.view()).map_err(wrap)?;
        theta.axpy_active(-ledger.step, &g);
        theta.project_admissible();
        warm = Some(u);
        j += 1;
    }
    rep.stop_index = j;
    rep.theta_final = theta;
    Ok(rep)
}

/// One row of a noise sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub delta: f64,
    pub seed: u64,
    pub j_star: usize,
    pub final_error: f64,
    pub final_residual: f64,
    pub total_lower_steps: usize,
    pub stop_reason: StopReason,
}

/// Bi-level runs for every `(delta, seed)` pair on noisy copies of the exact
/// data `clean`, in row-major order (`delta` outer). Runs are independent
/// and execute concurrently under [`Execution::Parallel`].
#[allow(clippy::too_many_arguments)]
pub fn noise_sweep(
    problem: &InverseProblem,
    clean: &ObservationData,
    theta0: &Parameter,
    ledger: &ConstantsLedger,
    cfg: &UpperConfig,
    deltas: &[f64],
    seeds: &[u64],
    truth: &Parameter,
    exec: Execution,
) -> Result<Vec<SweepEntry>> {
    if deltas.is_empty() || seeds.is_empty() {
        return Err(validation("sweep needs at least one delta and one seed"));
    }
    let disc = problem.model.disc();
    let n = deltas.len() * seeds.len();
    let rows = map_range(exec, n, |idx| -> Result<SweepEntry> {
        let (delta, seed) = (deltas[idx / seeds.len()], seeds[idx % seeds.len()]);
        let data = add_noise(disc, clean, delta, seed)?;
        let p = problem.with_data(data)?;
        let rep = bilevel_landweber(&p, theta0, ledger, cfg, Some(truth))?;
        Ok(SweepEntry {
            delta,
            seed,
            j_star: rep.stop_index,
            final_error: rep.final_error().unwrap_or(f64::NAN),
            final_residual: rep.final_residual(),
            total_lower_steps: rep.total_lower_steps(),
            stop_reason: rep.stop_reason,
        })
    });
    rows.into_iter().collect()
}
