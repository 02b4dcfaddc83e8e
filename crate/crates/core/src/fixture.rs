//! Manufactured-solution fixtures.
//!
//! The truth state is `u(x, t) = e^{-t} sin(pi x / length)` with constant
//! coefficients; the source is chosen analytically so that `u` solves the
//! continuous equation. On the grid the source is sampled at the implicit
//! time level of each step.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ActiveSet, Nonlinearity, Parameter, PdeModel, StateField};
use crate::observe::{ObservationSpec, DEFAULT_SNAPSHOTS};
use crate::par::Execution;
use crate::reference::{solve_forward, SolverConfig};
use crate::spaces::{build_grid, Discretization, SpaceTimeGrid};

/// Description of a manufactured problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub nx: usize,
    pub nt: usize,
    pub length: f64,
    pub t_final: f64,
    pub nonlinearity: Nonlinearity,
    pub a: f64,
    pub c: f64,
    pub a_lower: f64,
    pub active: ActiveSet,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            nx: 49,
            nt: 100,
            length: 1.0,
            t_final: 0.5,
            nonlinearity: Nonlinearity::MonotoneCubic,
            a: 1.0,
            c: 1.0,
            a_lower: 0.1,
            active: ActiveSet::default(),
        }
    }
}

/// Closed-form truth state on the grid.
pub fn exact_state(grid: &SpaceTimeGrid) -> StateField {
    let k = std::f64::consts::PI / grid.length;
    let x = grid.nodes();
    let t = grid.times();
    Array2::from_shape_fn((grid.nt + 1, grid.nx), |(n, i)| (-t[n]).exp() * (k * x[i]).sin())
}

/// Source that makes [`exact_state`] an exact solution of the PDE.
pub fn exact_source(grid: &SpaceTimeGrid, nl: Nonlinearity, a: f64, c: f64) -> Array2<f64> {
    let k = std::f64::consts::PI / grid.length;
    let x = grid.nodes();
    let t = grid.times();
    Array2::from_shape_fn((grid.nt, grid.nx), |(n, i)| {
        let u = (-t[n + 1]).exp() * (k * x[i]).sin();
        u * (-1.0 + a * k * k + c) + nl.eval(u)
    })
}

/// A complete manufactured problem.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub spec: FixtureSpec,
    pub model: PdeModel,
    pub solver: SolverConfig,
    pub theta_true: Parameter,
    /// Closed-form state sampled on the grid.
    pub u_exact: StateField,
    /// Discrete solution `S(theta_true)`.
    pub u_true: StateField,
}

impl Fixture {
    pub fn new(spec: FixtureSpec) -> Result<Self> {
        let grid = build_grid(spec.nx, spec.nt, spec.length, spec.t_final)?;
        let disc = Arc::new(Discretization::new(grid)?);
        let model = PdeModel::new(disc, spec.nonlinearity)?;
        let u_exact = exact_state(&grid);
        let theta_true = Parameter::new(
            &grid,
            Array1::from_elem(grid.nx, spec.a),
            Array1::from_elem(grid.nx, spec.c),
            exact_source(&grid, spec.nonlinearity, spec.a, spec.c),
            u_exact.row(0).to_owned(),
            spec.active,
            spec.a_lower,
        )?;
        let solver = SolverConfig::default();
        let u_true = solve_forward(&model, &theta_true, &solver)?;
        Ok(Self {
            spec,
            model,
            solver,
            theta_true,
            u_exact,
            u_true,
        })
    }

    /// The default problem: 49 x 100 grid on `(0,1) x (0,0.5)`, cubic
    /// reaction, source and initial state unknown.
    pub fn default_problem() -> Result<Self> {
        Self::new(FixtureSpec::default())
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.model.disc().grid()
    }

    pub fn disc(&self) -> &Discretization {
        self.model.disc()
    }

    /// The same problem with every data-parallel loop run under `exec`.
    pub fn with_execution(mut self, exec: Execution) -> Result<Self> {
        let disc = Arc::new(self.disc().clone().with_execution(exec));
        self.model = PdeModel::new(disc, self.spec.nonlinearity)?;
        Ok(self)
    }

    /// Replace the truth; both state fields become `S(theta)`.
    pub fn with_truth(mut self, theta: Parameter) -> Result<Self> {
        self.model.check_parameter(&theta)?;
        self.u_true = solve_forward(&self.model, &theta, &self.solver)?;
        self.u_exact = self.u_true.clone();
        self.theta_true = theta;
        Ok(self)
    }

    /// Default observation: equispaced snapshots.
    pub fn default_observation(&self) -> Result<ObservationSpec> {
        ObservationSpec::equispaced_snapshots(self.grid(), DEFAULT_SNAPSHOTS)
    }

    /// Initial guess: the truth with active components replaced by zero.
    pub fn zero_guess(&self) -> Parameter {
        let mut p = self.theta_true.clone();
        if p.active.a {
            p.a.fill(1.0);
        }
        if p.active.c {
            p.c.fill(0.0);
        }
        if p.active.phi {
            p.phi.fill(0.0);
        }
        if p.active.u0 {
            p.u0.fill(0.0);
        }
        p
    }
}
