//! Shape test for the output and adjoint error bounds of the inexact state.
//!
//! For a parameter perturbation of size `s` and a state error of size `eps`
//! the measured errors
//!
//! ```text
//! e_out = ||L S(theta_1) - L u~_2||_Y,
//! e_adj = ||S'(theta_1)* v - S'~(theta_2)* v||_X,
//! ```
//!
//! with `theta_2 = theta_1 + s xi` and `u~_2 = S(theta_2) + eps w`, should
//! vanish at the origin and be well described by `alpha s + beta eps`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampling::{smooth_direction, smooth_state};
use crate::adjoint::s_prime_adjoint;
use crate::error::{validation, Result};
use crate::model::{Parameter, PdeModel};
use crate::observe::{observe, observe_adjoint, ObservationSpec};
use crate::par::map_range;
use crate::reference::{solve_forward, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorLemmaConfig {
    /// Parameter perturbation sizes `||theta_2 - theta_1||_X`.
    pub dtheta_sizes: Vec<f64>,
    /// State error sizes `||u~ - S(theta_2)||_CalU`.
    pub eps_sizes: Vec<f64>,
    pub seed: u64,
    pub r2_threshold: f64,
}

impl Default for ErrorLemmaConfig {
    fn default() -> Self {
        let sizes = vec![0.0, 1e-3, 2e-3, 4e-3, 8e-3];
        Self {
            dtheta_sizes: sizes.clone(),
            eps_sizes: sizes,
            seed: 0,
            r2_threshold: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorLemmaSample {
    pub dtheta: f64,
    pub eps: f64,
    pub output_error: f64,
    pub adjoint_error: f64,
}

/// Least-squares fit `e ~ alpha s + beta eps` without intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearFit {
    pub alpha: f64,
    pub beta: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorLemmaReport {
    pub samples: Vec<ErrorLemmaSample>,
    pub output_fit: BilinearFit,
    pub adjoint_fit: BilinearFit,
    /// Largest error at `(0, 0)`.
    pub origin_error: f64,
    /// Errors at the smallest non-zero controls relative to the largest.
    pub vanishing_ratio: f64,
    pub pass: bool,
}

fn bilinear_fit(s: &[f64], e: &[f64], y: &[f64]) -> BilinearFit {
    let (mut ss, mut se, mut ee, mut sy, mut ey) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        ss += s[i] * s[i];
        se += s[i] * e[i];
        ee += e[i] * e[i];
        sy += s[i] * y[i];
        ey += e[i] * y[i];
    }
    let det = ss * ee - se * se;
    let (alpha, beta) = if det.abs() > 1e-300 {
        ((sy * ee - ey * se) / det, (ey * ss - sy * se) / det)
    } else {
        (0.0, 0.0)
    };
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let res: f64 = (0..y.len()).map(|i| (y[i] - alpha * s[i] - beta * e[i]).powi(2)).sum();
    let r2 = if tot > 0.0 { 1.0 - res / tot } else { 1.0 };
    BilinearFit { alpha, beta, r2 }
}

/// Run the `(s, eps)` sweep around `theta`.
pub fn verify_error_lemmas(
    model: &PdeModel,
    solver: &SolverConfig,
    spec: &ObservationSpec,
    theta: &Parameter,
    cfg: &ErrorLemmaConfig,
) -> Result<ErrorLemmaReport> {
    if cfg.dtheta_sizes.is_empty() || cfg.eps_sizes.is_empty() {
        return Err(validation("error-lemma sweep needs at least one size per control"));
    }
    if cfg
        .dtheta_sizes
        .iter()
        .chain(&cfg.eps_sizes)
        .any(|v| !(*v >= 0.0 && v.is_finite()))
    {
        return Err(validation("error-lemma sizes must be finite and >= 0"));
    }
    let disc = model.disc();
    let grid = *disc.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let xi = smooth_direction(&grid, theta, &mut rng);
    let xi = xi.scaled(1.0 / disc.norm_x(&xi)?);
    let w = smooth_state(&grid, &mut rng);
    let w = &w / disc.norm_cal_u(w.view());
    let u1 = solve_forward(model, theta, solver)?;
    let y1 = observe(disc, u1.view(), spec)?;
    // Fixed adjoint source: L* of a smooth data-space field.
    let r = spec.apply(disc, smooth_state(&grid, &mut rng).view())?;
    let v = observe_adjoint(disc, r.view(), spec)?;
    let g1 = s_prime_adjoint(model, theta, u1.view(), v.view())?;

    let ns = cfg.dtheta_sizes.len();
    let ne = cfg.eps_sizes.len();
    let states = map_range(disc.execution(), ns, |i| -> Result<_> {
        let mut t2 = theta.clone();
        t2.axpy_active(cfg.dtheta_sizes[i], &xi);
        let u2 = solve_forward(model, &t2, solver)?;
        Ok((t2, u2))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let samples = map_range(disc.execution(), ns * ne, |idx| -> Result<ErrorLemmaSample> {
        let (i, k) = (idx / ne, idx % ne);
        let (t2, u2) = &states[i];
        let approx = u2 + &(&w * cfg.eps_sizes[k]);
        let mut dy = observe(disc, approx.view(), spec)?;
        dy.values -= &y1.values;
        let g2 = s_prime_adjoint(model, t2, approx.view(), v.view())?;
        Ok(ErrorLemmaSample {
            dtheta: cfg.dtheta_sizes[i],
            eps: cfg.eps_sizes[k],
            output_error: dy.norm(disc),
            adjoint_error: disc.norm_x(&g1.diff(&g2))?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let s: Vec<f64> = samples.iter().map(|x| x.dtheta).collect();
    let e: Vec<f64> = samples.iter().map(|x| x.eps).collect();
    let out: Vec<f64> = samples.iter().map(|x| x.output_error).collect();
    let adj: Vec<f64> = samples.iter().map(|x| x.adjoint_error).collect();
    let output_fit = bilinear_fit(&s, &e, &out);
    let adjoint_fit = bilinear_fit(&s, &e, &adj);

    let origin_error = samples
        .iter()
        .filter(|x| x.dtheta == 0.0 && x.eps == 0.0)
        .map(|x| x.output_error.max(x.adjoint_error))
        .fold(0.0, f64::max);
    let smallest = |v: &[f64]| v.iter().copied().filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
    let largest = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let (s_min, e_min) = (smallest(&cfg.dtheta_sizes), smallest(&cfg.eps_sizes));
    let (s_max, e_max) = (largest(&cfg.dtheta_sizes), largest(&cfg.eps_sizes));
    let at = |ds: f64, de: f64| {
        samples
            .iter()
            .find(|x| x.dtheta == ds && x.eps == de)
            .map(|x| (x.output_error, x.adjoint_error))
    };
    let vanishing_ratio = match (at(s_min, e_min), at(s_max, e_max)) {
        (Some(small), Some(big)) if big.0 > 0.0 && big.1 > 0.0 => (small.0 / big.0).max(small.1 / big.1),
        _ => f64::NAN,
    };
    let expected_ratio = (s_min / s_max).max(e_min / e_max);
    let pass = output_fit.r2 >= cfg.r2_threshold
        && adjoint_fit.r2 >= cfg.r2_threshold
        && origin_error <= 1e-10
        && vanishing_ratio <= 2.0 * expected_ratio;
    Ok(ErrorLemmaReport {
        samples,
        output_fit,
        adjoint_fit,
        origin_error,
        vanishing_ratio,
        pass,
    })
}
