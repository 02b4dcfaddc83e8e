use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

/// Uniform space-time grid on `(0, length) x (0, t_final)`.
///
/// Space has `nx` interior nodes (homogeneous Dirichlet data at both ends);
/// time has `nt` steps and `nt + 1` slices including `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub nx: usize,
    pub nt: usize,
    pub length: f64,
    pub t_final: f64,
    pub hx: f64,
    pub ht: f64,
}

impl SpaceTimeGrid {
    pub fn new(nx: usize, nt: usize, length: f64, t_final: f64) -> Result<Self> {
        if nx < 2 {
            return Err(validation(format!("nx must be at least 2, got {nx}")));
        }
        if nt < 2 {
            return Err(validation(format!("nt must be at least 2, got {nt}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(validation(format!("domain length must be positive, got {length}")));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(validation(format!("final time must be positive, got {t_final}")));
        }
        Ok(Self {
            nx,
            nt,
            length,
            t_final,
            hx: length / (nx as f64 + 1.0),
            ht: t_final / nt as f64,
        })
    }

    /// Interior node coordinates.
    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.nx).map(|i| i as f64 * self.hx).collect()
    }

    /// All `nt + 1` time levels.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|n| n as f64 * self.ht).collect()
    }

    /// Index of the time slice at `t`, if `t` lies on the grid.
    pub fn slice_index(&self, t: f64) -> Option<usize> {
        let r = t / self.ht;
        let n = r.round();
        if n < 0.0 || n > self.nt as f64 || (r - n).abs() > 1e-9 {
            None
        } else {
            Some(n as usize)
        }
    }
}

/// Build a grid; fails on `nx < 2`, `nt < 2` or non-positive extents.
pub fn build_grid(nx: usize, nt: usize, length: f64, t_final: f64) -> Result<SpaceTimeGrid> {
    SpaceTimeGrid::new(nx, nt, length, t_final)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_spacings() {
        let g = build_grid(3, 4, 1.0, 1.0).unwrap();
        assert_eq!(g.hx, 0.25);
        assert_eq!(g.ht, 0.25);
        assert_eq!(g.nodes(), vec![0.25, 0.5, 0.75]);
        assert_eq!(g.times().len(), 5);
    }

    #[test]
    fn default_grid_spacings() {
        let g = build_grid(49, 100, 1.0, 0.5).unwrap();
        assert!((g.hx - 0.02).abs() < 1e-15);
        assert!((g.ht - 0.005).abs() < 1e-15);
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        assert!(build_grid(1, 10, 1.0, 1.0).is_err());
        assert!(build_grid(10, 1, 1.0, 1.0).is_err());
        assert!(build_grid(10, 10, 0.0, 1.0).is_err());
        assert!(build_grid(10, 10, 1.0, -1.0).is_err());
        assert!(build_grid(10, 10, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn slice_lookup() {
        let g = build_grid(9, 10, 1.0, 1.0).unwrap();
        assert_eq!(g.slice_index(0.3), Some(3));
        assert_eq!(g.slice_index(1.0), Some(10));
        assert_eq!(g.slice_index(0.35), None);
        assert_eq!(g.slice_index(1.1), None);
    }
}
