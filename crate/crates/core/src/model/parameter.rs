use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{shape, validation, Result};
use crate::spaces::SpaceTimeGrid;

/// Which parameter components are reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub a: bool,
    pub c: bool,
    pub phi: bool,
    pub u0: bool,
}

impl Default for ActiveSet {
    /// Source and initial state.
    fn default() -> Self {
        Self {
            a: false,
            c: false,
            phi: true,
            u0: true,
        }
    }
}

impl ActiveSet {
    pub fn none() -> Self {
        Self {
            a: false,
            c: false,
            phi: false,
            u0: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.a || self.c || self.phi || self.u0)
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.a {
            v.push("a");
        }
        if self.c {
            v.push("c");
        }
        if self.phi {
            v.push("phi");
        }
        if self.u0 {
            v.push("u0");
        }
        v
    }
}

/// Model parameter `theta = (a, c, phi, u0)`.
///
/// `phi` holds one spatial source per time step: row `n` drives the step from
/// slice `n` to slice `n + 1`. The same type doubles as a direction and as a
/// dual vector in `X*`; in those roles `a_lower` is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub a: Array1<f64>,
    pub c: Array1<f64>,
    pub phi: Array2<f64>,
    pub u0: Array1<f64>,
    pub active: ActiveSet,
    /// Lower bound for the diffusion coefficient.
    pub a_lower: f64,
}

impl Parameter {
    pub fn new(
        grid: &SpaceTimeGrid,
        a: Array1<f64>,
        c: Array1<f64>,
        phi: Array2<f64>,
        u0: Array1<f64>,
        active: ActiveSet,
        a_lower: f64,
    ) -> Result<Self> {
        if !(a_lower.is_finite() && a_lower >= 0.0) {
            return Err(validation(format!("a_lower must be finite and >= 0, got {a_lower}")));
        }
        let p = Self {
            a,
            c,
            phi,
            u0,
            active,
            a_lower,
        };
        p.check_shape(grid)?;
        Ok(p)
    }

    /// All-zero parameter with unit diffusion.
    pub fn zeros(grid: &SpaceTimeGrid, active: ActiveSet) -> Self {
        Self {
            a: Array1::ones(grid.nx),
            c: Array1::zeros(grid.nx),
            phi: Array2::zeros((grid.nt, grid.nx)),
            u0: Array1::zeros(grid.nx),
            active,
            a_lower: 0.0,
        }
    }

    /// Zero vector with the same shape and active set (a direction).
    pub fn zeros_like(&self) -> Self {
        Self {
            a: Array1::zeros(self.a.len()),
            c: Array1::zeros(self.c.len()),
            phi: Array2::zeros(self.phi.raw_dim()),
            u0: Array1::zeros(self.u0.len()),
            active: self.active,
            a_lower: self.a_lower,
        }
    }

    pub fn check_shape(&self, grid: &SpaceTimeGrid) -> Result<()> {
        let nx = grid.nx;
        if self.a.len() != nx || self.c.len() != nx || self.u0.len() != nx {
            return Err(shape(format!(
                "parameter fields have lengths a={}, c={}, u0={}, expected {nx}",
                self.a.len(),
                self.c.len(),
                self.u0.len()
            )));
        }
        if self.phi.dim() != (grid.nt, nx) {
            return Err(shape(format!(
                "source has shape {:?}, expected ({}, {nx})",
                self.phi.dim(),
                grid.nt
            )));
        }
        Ok(())
    }

    /// `self += alpha * d` on the active components of `self`.
    pub fn axpy_active(&mut self, alpha: f64, d: &Parameter) {
        if self.active.a {
            self.a.scaled_add(alpha, &d.a);
        }
        if self.active.c {
            self.c.scaled_add(alpha, &d.c);
        }
        if self.active.phi {
            self.phi.scaled_add(alpha, &d.phi);
        }
        if self.active.u0 {
            self.u0.scaled_add(alpha, &d.u0);
        }
    }

    /// Componentwise `self - other` as a direction; inactive parts are zeroed.
    pub fn diff(&self, other: &Parameter) -> Parameter {
        let mut d = Parameter {
            a: &self.a - &other.a,
            c: &self.c - &other.c,
            phi: &self.phi - &other.phi,
            u0: &self.u0 - &other.u0,
            active: self.active,
            a_lower: self.a_lower,
        };
        d.zero_inactive();
        d
    }

    pub fn scaled(&self, s: f64) -> Parameter {
        Parameter {
            a: &self.a * s,
            c: &self.c * s,
            phi: &self.phi * s,
            u0: &self.u0 * s,
            active: self.active,
            a_lower: self.a_lower,
        }
    }

    pub fn zero_inactive(&mut self) {
        if !self.active.a {
            self.a.fill(0.0);
        }
        if !self.active.c {
            self.c.fill(0.0);
        }
        if !self.active.phi {
            self.phi.fill(0.0);
        }
        if !self.active.u0 {
            self.u0.fill(0.0);
        }
    }

    /// Clamp the diffusion coefficient just above its lower bound.
    pub fn project_admissible(&mut self) {
        if self.active.a {
            let floor = self.a_lower + 1e-12 * self.a_lower.abs().max(1.0);
            self.a.mapv_inplace(|v| v.max(floor));
        }
    }

    /// Active components flattened in the order `a, c, phi, u0`.
    pub fn active_vec(&self) -> Vec<f64> {
        let mut v = Vec::new();
        if self.active.a {
            v.extend(self.a.iter());
        }
        if self.active.c {
            v.extend(self.c.iter());
        }
        if self.active.phi {
            v.extend(self.phi.iter());
        }
        if self.active.u0 {
            v.extend(self.u0.iter());
        }
        v
    }

    /// Direction shaped like `self` whose active components are read from `v`.
    pub fn direction_from_vec(&self, v: &[f64]) -> Parameter {
        let mut d = self.zeros_like();
        let mut k = 0;
        let mut take = |dst: &mut dyn Iterator<Item = &mut f64>| {
            for x in dst {
                *x = v[k];
                k += 1;
            }
        };
        if self.active.a {
            take(&mut d.a.iter_mut());
        }
        if self.active.c {
            take(&mut d.c.iter_mut());
        }
        if self.active.phi {
            take(&mut d.phi.iter_mut());
        }
        if self.active.u0 {
            take(&mut d.u0.iter_mut());
        }
        d
    }

    pub fn active_len(&self) -> usize {
        let nx = self.a.len();
        let mut n = 0;
        if self.active.a {
            n += nx;
        }
        if self.active.c {
            n += nx;
        }
        if self.active.phi {
            n += self.phi.len();
        }
        if self.active.u0 {
            n += nx;
        }
        n
    }

    /// Euclidean pairing of a dual vector with a direction (active parts).
    pub fn pairing(&self, d: &Parameter) -> f64 {
        crate::linalg::dot(&self.active_vec(), &d.active_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::build_grid;

    #[test]
    fn flatten_round_trip() {
        let g = build_grid(4, 3, 1.0, 1.0).unwrap();
        let mut p = Parameter::zeros(&g, ActiveSet::default());
        p.phi[[1, 2]] = 3.0;
        p.u0[3] = -1.0;
        let v = p.active_vec();
        assert_eq!(v.len(), p.active_len());
        let q = p.direction_from_vec(&v);
        assert_eq!(q.phi, p.phi);
        assert_eq!(q.u0, p.u0);
        assert!(q.a.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn wrong_shapes_rejected() {
        let g = build_grid(4, 3, 1.0, 1.0).unwrap();
        let r = Parameter::new(
            &g,
            Array1::ones(4),
            Array1::zeros(4),
            Array2::zeros((4, 4)),
            Array1::zeros(4),
            ActiveSet::default(),
            0.0,
        );
        assert!(r.is_err());
    }

    #[test]
    fn projection_respects_bound() {
        let g = build_grid(4, 3, 1.0, 1.0).unwrap();
        let mut p = Parameter::zeros(
            &g,
            ActiveSet {
                a: true,
                ..ActiveSet::none()
            },
        );
        p.a_lower = 0.5;
        p.a = Array1::from(vec![0.1, 0.7, -2.0, 0.5]);
        p.project_admissible();
        assert!(p.a.iter().all(|v| *v > 0.5));
        assert_eq!(p.a[1], 0.7);
    }
}
