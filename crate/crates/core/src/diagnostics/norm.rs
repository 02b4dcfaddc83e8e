use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

/// Minimum number of power iterations.
pub const MIN_POWER_ITERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub norm: f64,
    pub iterations: usize,
    /// `||A*A x - lambda x|| / ||A*A x||` at the last iterate.
    pub residual: f64,
}

/// Power iteration for `||A||`.
///
/// `normal(x)` must return `(||A x||_out^2, A* A x)` for a vector `x` of
/// length `dim`, with the adjoint taken with respect to `inner_in`. At least
/// [`MIN_POWER_ITERS`] iterations are run from a seeded random start.
pub fn estimate_operator_norm<N, I>(dim: usize, mut normal: N, inner_in: I, n_iters: usize, seed: u64) -> Result<NormEstimate>
where
    N: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    if dim == 0 {
        return Err(validation("operator norm of an empty space"));
    }
    let iters = n_iters.max(MIN_POWER_ITERS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nrm = |v: &[f64]| inner_in(v, v).max(0.0).sqrt();
    let n0 = nrm(&x);
    x.iter_mut().for_each(|v| *v /= n0);
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..iters {
        let (img_sq, w) = normal(&x)?;
        lambda = img_sq;
        let wn = nrm(&w);
        if wn == 0.0 {
            return Ok(NormEstimate {
                norm: 0.0,
                iterations: iters,
                residual: 0.0,
            });
        }
        let diff: Vec<f64> = w.iter().zip(&x).map(|(a, b)| a - lambda * b).collect();
        residual = nrm(&diff) / wn;
        x = w.into_iter().map(|v| v / wn).collect();
    }
    Ok(NormEstimate {
        norm: lambda.max(0.0).sqrt(),
        iterations: iters,
        residual,
    })
}
