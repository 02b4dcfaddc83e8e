use crate::error::{shape, Error, Result};
use crate::linalg::{SymTridiag, TridiagFactor};

use super::grid::SpaceTimeGrid;

/// Spatial matrices on the interior nodes.
///
/// `mass` is the lumped (diagonal) mass, `stiffness` discretises
/// `-d/dx (a d/dx .)` with midpoint-averaged coefficients and `riesz_du` is
/// `mass + stiffness(a = 1)`, the Riesz map of `H^1_0`. The Riesz map never
/// depends on the unknown coefficient.
#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    pub mass: Vec<f64>,
    pub stiffness: SymTridiag,
    pub riesz_du: SymTridiag,
    pub(crate) riesz_factor: TridiagFactor,
}

impl DiscreteOperators {
    pub fn assemble(grid: &SpaceTimeGrid, a_field: &[f64], a_lower: f64) -> Result<Self> {
        check_coefficient(a_field, a_lower, grid.nx)?;
        let stiffness = stiffness_matrix(grid, a_field)?;
        let unit = stiffness_matrix(grid, &vec![1.0; grid.nx])?;
        let mass = vec![grid.hx; grid.nx];
        let mut riesz_du = unit;
        riesz_du.add_diagonal(&mass);
        let riesz_factor = riesz_du.factor().expect("mass plus stiffness is positive definite");
        Ok(Self {
            mass,
            stiffness,
            riesz_du,
            riesz_factor,
        })
    }
}

/// Assemble operators for a given diffusion field; fails when `a <= a_lower`
/// anywhere.
pub fn assemble_operators(grid: &SpaceTimeGrid, a_field: &[f64], a_lower: f64) -> Result<DiscreteOperators> {
    DiscreteOperators::assemble(grid, a_field, a_lower)
}

pub(crate) fn check_coefficient(a: &[f64], a_lower: f64, nx: usize) -> Result<()> {
    if a.len() != nx {
        return Err(shape(format!("diffusion field has {} values, grid has {nx}", a.len())));
    }
    for (node, &value) in a.iter().enumerate() {
        if !(value > a_lower) || !value.is_finite() {
            return Err(Error::Coefficient {
                node,
                value,
                bound: a_lower,
            });
        }
    }
    Ok(())
}

/// Midpoint coefficient values `a_{j-1/2}`, `j = 0..=nx`; the two boundary
/// half-points reuse the nearest interior value.
fn half_point_values(a: &[f64]) -> Vec<f64> {
    let nx = a.len();
    let mut h = Vec::with_capacity(nx + 1);
    h.push(a[0]);
    for j in 1..nx {
        h.push(0.5 * (a[j - 1] + a[j]));
    }
    h.push(a[nx - 1]);
    h
}

/// Stiffness matrix for a coefficient field without any positivity check.
/// Linear in `a`, so it also applies to parameter directions.
pub fn stiffness_matrix(grid: &SpaceTimeGrid, a: &[f64]) -> Result<SymTridiag> {
    if a.len() != grid.nx {
        return Err(shape(format!(
            "coefficient field has {} values, grid has {}",
            a.len(),
            grid.nx
        )));
    }
    let h = half_point_values(a);
    let nx = grid.nx;
    let inv = 1.0 / grid.hx;
    let diag = (0..nx).map(|i| (h[i] + h[i + 1]) * inv).collect();
    let off = (0..nx - 1).map(|i| -h[i + 1] * inv).collect();
    SymTridiag::new(diag, off)
}

/// Gradient of `a -> z^T K_a u` with respect to the nodal values of `a`,
/// accumulated into `out` with weight `scale`.
pub(crate) fn stiffness_bilinear_gradient(grid: &SpaceTimeGrid, z: &[f64], u: &[f64], scale: f64, out: &mut [f64]) {
    let nx = grid.nx;
    let jump = |v: &[f64], j: usize| -> f64 {
        let right = if j < nx { v[j] } else { 0.0 };
        let left = if j > 0 { v[j - 1] } else { 0.0 };
        right - left
    };
    let inv = scale / grid.hx;
    for j in 0..=nx {
        let e = jump(z, j) * jump(u, j) * inv;
        if j == 0 {
            out[0] += e;
        } else if j == nx {
            out[nx - 1] += e;
        } else {
            out[j - 1] += 0.5 * e;
            out[j] += 0.5 * e;
        }
    }
}
