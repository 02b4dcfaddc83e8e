use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampling::{smooth_direction, smooth_state};
use crate::error::{validation, Error, Result};
use crate::model::{ActiveSet, Parameter, PdeModel, StateField};
use crate::observe::{observe, ObservationSpec};
use crate::par::map_range;
use crate::reference::{solve_forward, solve_sensitivity, SolverConfig};

/// Sampling settings shared by all probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub n_pairs: usize,
    /// Radius of the sampling ball around the centre (state: `CalV` norm,
    /// parameter: `X` norm).
    pub ball_radius: f64,
    pub seed: u64,
    /// Pass threshold; probes fall back to their own default when absent.
    pub threshold: Option<f64>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            n_pairs: 50,
            ball_radius: 0.1,
            seed: 0,
            threshold: None,
        }
    }
}

impl ProbeConfig {
    fn validate(&self) -> Result<()> {
        if self.n_pairs < 10 {
            return Err(validation(format!("probes need n_pairs >= 10, got {}", self.n_pairs)));
        }
        if !(self.ball_radius > 0.0 && self.ball_radius.is_finite()) {
            return Err(validation("ball_radius must be positive"));
        }
        Ok(())
    }

    fn pair_rng(&self, k: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64 + 1);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub constant_name: String,
    pub estimate: f64,
    pub sample_count: usize,
    pub skipped: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub threshold: f64,
    pub pass: bool,
}

enum Pick {
    Max,
    Min,
}

fn summarize(name: &str, ratios: Vec<Option<f64>>, pick: Pick, threshold: f64) -> Result<ProbeReport> {
    let total = ratios.len();
    let kept: Vec<f64> = ratios.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::InsufficientData(format!("{name}: every sample was skipped")));
    }
    let min_ratio = kept.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = kept.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (estimate, pass) = match pick {
        Pick::Max => (max_ratio, max_ratio < threshold),
        Pick::Min => (min_ratio, min_ratio > threshold),
    };
    if !estimate.is_finite() {
        return Err(Error::InsufficientData(format!("{name}: non-finite estimate")));
    }
    Ok(ProbeReport {
        constant_name: name.to_string(),
        estimate,
        sample_count: kept.len(),
        skipped: total - kept.len(),
        min_ratio,
        max_ratio,
        threshold,
        pass,
    })
}

/// Unit `CalV` direction for sample `k`. Even samples are smooth random
/// fields; odd samples solve the linearised equation at `centre` with smooth
/// random forcing and initial value, which reaches the weakly damped
/// directions that plain smooth fields rarely hit.
fn state_direction(
    model: &PdeModel,
    theta: &Parameter,
    centre: ArrayView2<f64>,
    rng: &mut ChaCha8Rng,
    k: usize,
) -> Result<StateField> {
    let grid = *model.disc().grid();
    let h = if k.is_multiple_of(2) {
        smooth_state(&grid, rng)
    } else {
        let mut forced = theta.clone();
        forced.active = ActiveSet {
            a: false,
            c: false,
            phi: true,
            u0: true,
        };
        let xi = smooth_direction(&grid, &forced, rng);
        solve_sensitivity(model, &forced, centre, &xi)?
    };
    let n = model.disc().norm_cal_v(h.view());
    Ok(h / n)
}

fn ball_point(
    model: &PdeModel,
    theta: &Parameter,
    centre: ArrayView2<f64>,
    cfg: &ProbeConfig,
    rng: &mut ChaCha8Rng,
    k: usize,
) -> Result<StateField> {
    let h = state_direction(model, theta, centre, rng, k)?;
    let r = cfg.ball_radius * rng.gen_range(0.1..1.0);
    Ok(&centre + &(h * r))
}

/// Lipschitz-stability constant `C_coe`: the largest observed
/// `||u - v||_CalU / ||F(u) - F(v)||` over pairs near `u_star`.
pub fn probe_coercivity(model: &PdeModel, theta: &Parameter, u_star: ArrayView2<f64>, cfg: &ProbeConfig) -> Result<ProbeReport> {
    cfg.validate()?;
    let disc = model.disc();
    let ratios = map_range(disc.execution(), cfg.n_pairs, |k| -> Result<Option<f64>> {
        let mut rng = cfg.pair_rng(k);
        let u = ball_point(model, theta, u_star, cfg, &mut rng, k)?;
        let v = ball_point(model, theta, u_star, cfg, &mut rng, k)?;
        let du = disc.norm_cal_u((&u - &v).view());
        let df = model.residual(theta, u.view())?.sub(&model.residual(theta, v.view())?);
        let dn = model.residual_norm(&df);
        Ok((du > 0.0 && dn > 1e-14 * du).then(|| du / dn))
    });
    let ratios = ratios.into_iter().collect::<Result<Vec<_>>>()?;
    summarize("C_coe", ratios, Pick::Max, cfg.threshold.unwrap_or(f64::INFINITY))
}

/// Tangential-cone constant of the state residual:
/// `max ||F(u) - F(v) - F'(u)(u - v)|| / ||F(u) - F(v)||`. Passes below 1.
pub fn probe_tangential_cone_lower(
    model: &PdeModel,
    theta: &Parameter,
    u_star: ArrayView2<f64>,
    cfg: &ProbeConfig,
) -> Result<ProbeReport> {
    cfg.validate()?;
    let disc = model.disc();
    let ratios = map_range(disc.execution(), cfg.n_pairs, |k| -> Result<Option<f64>> {
        let mut rng = cfg.pair_rng(k);
        let u = ball_point(model, theta, u_star, cfg, &mut rng, k)?;
        let v = ball_point(model, theta, u_star, cfg, &mut rng, k)?;
        let df = model.residual(theta, u.view())?.sub(&model.residual(theta, v.view())?);
        let dn = model.residual_norm(&df);
        if dn == 0.0 {
            return Ok(None);
        }
        let lin = model.apply_fprime(theta, u.view(), (&u - &v).view())?;
        Ok(Some(model.residual_norm(&df.sub(&lin)) / dn))
    });
    let ratios = ratios.into_iter().collect::<Result<Vec<_>>>()?;
    summarize("c_tc_lower", ratios, Pick::Max, cfg.threshold.unwrap_or(1.0))
}

/// Tangential-cone constant of `G = L S` over parameter pairs in the
/// `X`-ball around `theta`, every `S` evaluated by the reference solver.
pub fn probe_tangential_cone_upper(
    model: &PdeModel,
    solver: &SolverConfig,
    spec: &ObservationSpec,
    theta: &Parameter,
    cfg: &ProbeConfig,
) -> Result<ProbeReport> {
    cfg.validate()?;
    if theta.active.is_empty() {
        return Err(validation("no active parameter component"));
    }
    let disc = model.disc();
    let grid = *disc.grid();
    let point = |rng: &mut ChaCha8Rng| -> Result<Parameter> {
        let d = smooth_direction(&grid, theta, rng);
        let r = cfg.ball_radius * rng.gen_range(0.1..1.0) / disc.norm_x(&d)?;
        let mut p = theta.clone();
        p.axpy_active(r, &d);
        p.project_admissible();
        Ok(p)
    };
    let ratios = map_range(disc.execution(), cfg.n_pairs, |k| -> Result<Option<f64>> {
        let mut rng = cfg.pair_rng(k);
        let t1 = point(&mut rng)?;
        let t2 = point(&mut rng)?;
        let u1 = solve_forward(model, &t1, solver)?;
        let u2 = solve_forward(model, &t2, solver)?;
        let g1 = observe(disc, u1.view(), spec)?;
        let g2 = observe(disc, u2.view(), spec)?;
        let mut dg = g1.clone();
        dg.values -= &g2.values;
        let dn = dg.norm(disc);
        if dn == 0.0 {
            return Ok(None);
        }
        let p = solve_sensitivity(model, &t1, u1.view(), &t1.diff(&t2))?;
        let lin = spec.apply(disc, p.view())?;
        dg.values -= &lin;
        Ok(Some(dg.norm(disc) / dn))
    });
    let ratios = ratios.into_iter().collect::<Result<Vec<_>>>()?;
    summarize("c_tc_upper", ratios, Pick::Max, cfg.threshold.unwrap_or(1.0))
}

/// Polyak-Lojasiewicz constant of `J(u) = ||F(u)||^2`:
/// `min ||J'(u)||_{CalV*}^2 / J(u)`, with the dual norm evaluated through the
/// `CalV` representer. Passes above 0.
pub fn probe_pl(model: &PdeModel, theta: &Parameter, u_star: ArrayView2<f64>, cfg: &ProbeConfig) -> Result<ProbeReport> {
    cfg.validate()?;
    let disc = model.disc();
    let floor = 1e-24;
    let ratios = map_range(disc.execution(), cfg.n_pairs, |k| -> Result<Option<f64>> {
        let mut rng = cfg.pair_rng(k);
        let u = ball_point(model, theta, u_star, cfg, &mut rng, k)?;
        let r = model.residual(theta, u.view())?;
        let j = model.residual_inner(&r, &r);
        if j < floor {
            return Ok(None);
        }
        let g = model.apply_fprime_adjoint(theta, u.view(), &r)? * 2.0;
        let gn = disc.norm_cal_v(g.view());
        Ok(Some(gn * gn / j))
    });
    let ratios = ratios.into_iter().collect::<Result<Vec<_>>>()?;
    summarize("mu_pl", ratios, Pick::Min, cfg.threshold.unwrap_or(0.0))
}
