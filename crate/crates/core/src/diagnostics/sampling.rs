//! Smooth random fields for probes.
//!
//! Fields are finite sine/cosine expansions with decaying random
//! coefficients, so for a fixed seed the sampled continuous function does not
//! depend on the grid. Probes run on refined grids therefore see the same
//! directions.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::{Parameter, StateField};
use crate::spaces::SpaceTimeGrid;

pub const SPACE_MODES: usize = 8;
pub const TIME_MODES: usize = 5;

fn space_table(grid: &SpaceTimeGrid) -> Array2<f64> {
    let x = grid.nodes();
    Array2::from_shape_fn((grid.nx, SPACE_MODES), |(i, k)| {
        ((k + 1) as f64 * PI * x[i] / grid.length).sin()
    })
}

fn time_values(grid: &SpaceTimeGrid, t: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn((t.len(), TIME_MODES), |(n, m)| (m as f64 * PI * t[n] / grid.t_final).cos())
}

fn coefficients<R: Rng>(rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((TIME_MODES, SPACE_MODES), |(m, k)| {
        let z: f64 = rng.sample(StandardNormal);
        z / ((k + 1) as f64 * (m + 1) as f64)
    })
}

/// Smooth field on the time levels `t`.
fn field_on<R: Rng>(grid: &SpaceTimeGrid, t: &[f64], rng: &mut R) -> Array2<f64> {
    let c = coefficients(rng);
    time_values(grid, t).dot(&c).dot(&space_table(grid).t())
}

/// Smooth state field on all `nt + 1` time levels.
pub fn smooth_state<R: Rng>(grid: &SpaceTimeGrid, rng: &mut R) -> StateField {
    field_on(grid, &grid.times(), rng)
}

/// Smooth spatial profile vanishing at the boundary.
pub fn smooth_profile<R: Rng>(grid: &SpaceTimeGrid, rng: &mut R) -> Array1<f64> {
    let c: Vec<f64> = (0..SPACE_MODES)
        .map(|k| {
            let z: f64 = rng.sample(StandardNormal);
            z / (k + 1) as f64
        })
        .collect();
    space_table(grid).dot(&Array1::from(c))
}

/// Smooth random direction in the active components of `like`.
pub fn smooth_direction<R: Rng>(grid: &SpaceTimeGrid, like: &Parameter, rng: &mut R) -> Parameter {
    let mut d = like.zeros_like();
    // Draw every component so the stream does not depend on the active set.
    let a = smooth_profile(grid, rng);
    let c = smooth_profile(grid, rng);
    let phi = field_on(grid, &grid.times()[1..], rng);
    let u0 = smooth_profile(grid, rng);
    if like.active.a {
        d.a = a;
    }
    if like.active.c {
        d.c = c;
    }
    if like.active.phi {
        d.phi = phi;
    }
    if like.active.u0 {
        d.u0 = u0;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ActiveSet;
    use crate::spaces::build_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_gives_same_function_on_refined_grid() {
        let coarse = build_grid(9, 10, 1.0, 0.5).unwrap();
        let fine = build_grid(19, 20, 1.0, 0.5).unwrap();
        let a = smooth_state(&coarse, &mut ChaCha8Rng::seed_from_u64(4));
        let b = smooth_state(&fine, &mut ChaCha8Rng::seed_from_u64(4));
        // Coarse node (n, i) coincides with fine node (2n, 2i + 1).
        for n in 0..=10 {
            for i in 0..9 {
                assert!((a[[n, i]] - b[[2 * n, 2 * i + 1]]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn direction_respects_active_set() {
        let g = build_grid(9, 10, 1.0, 0.5).unwrap();
        let p = Parameter::zeros(&g, ActiveSet::default());
        let d = smooth_direction(&g, &p, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(d.a.iter().all(|v| *v == 0.0) && d.c.iter().all(|v| *v == 0.0));
        assert!(d.phi.iter().any(|v| *v != 0.0) && d.u0.iter().any(|v| *v != 0.0));
    }
}
