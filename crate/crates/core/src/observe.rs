//! Observation operators `L: CalU -> Y`, their adjoints and noise.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{shape, validation, Result};
use crate::model::StateField;
use crate::spaces::{Discretization, SpaceTimeGrid};

/// What is measured.
///
/// * `Full`: every slice, `Y = L^2(0,T; L^2)`.
/// * `Snapshots`: whole spatial profiles at grid times, `Y` is the sum of
///   `L^2` norms over the snapshots.
/// * `Averages`: weighted spatial averages on every slice; each window is a
///   nonnegative nodal weight with `hx * sum(w) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservationSpec {
    Full,
    Snapshots { times: Vec<f64> },
    Averages { windows: Vec<Vec<f64>> },
}

/// Default number of snapshots.
pub const DEFAULT_SNAPSHOTS: usize = 10;

impl ObservationSpec {
    /// `count` snapshots at `t_m = m T / count`, `m = 1..=count`.
    pub fn equispaced_snapshots(grid: &SpaceTimeGrid, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(validation("snapshot count must be positive"));
        }
        let times = (1..=count).map(|m| m as f64 * grid.t_final / count as f64).collect();
        let spec = ObservationSpec::Snapshots { times };
        spec.validate(grid)?;
        Ok(spec)
    }

    /// Indicator windows on the given subintervals, normalised to unit mean.
    pub fn indicator_averages(grid: &SpaceTimeGrid, intervals: &[(f64, f64)]) -> Result<Self> {
        let nodes = grid.nodes();
        let mut windows = Vec::new();
        for &(lo, hi) in intervals {
            let mut w: Vec<f64> = nodes.iter().map(|&x| if x >= lo && x <= hi { 1.0 } else { 0.0 }).collect();
            let mass: f64 = w.iter().sum::<f64>() * grid.hx;
            if mass <= 0.0 {
                return Err(validation(format!("window [{lo}, {hi}] contains no grid node")));
            }
            w.iter_mut().for_each(|v| *v /= mass);
            windows.push(w);
        }
        let spec = ObservationSpec::Averages { windows };
        spec.validate(grid)?;
        Ok(spec)
    }

    pub fn validate(&self, grid: &SpaceTimeGrid) -> Result<()> {
        match self {
            ObservationSpec::Full => Ok(()),
            ObservationSpec::Snapshots { times } => {
                if times.is_empty() {
                    return Err(validation("snapshot list is empty"));
                }
                for &t in times {
                    if grid.slice_index(t).is_none() {
                        return Err(validation(format!("snapshot time {t} is not on the time grid")));
                    }
                }
                Ok(())
            }
            ObservationSpec::Averages { windows } => {
                if windows.is_empty() {
                    return Err(validation("averages observation without windows"));
                }
                for (s, w) in windows.iter().enumerate() {
                    if w.len() != grid.nx {
                        return Err(shape(format!("window {s} has {} weights, grid has {}", w.len(), grid.nx)));
                    }
                    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                        return Err(validation(format!("window {s} has negative or non-finite weights")));
                    }
                    let mass: f64 = w.iter().sum::<f64>() * grid.hx;
                    if (mass - 1.0).abs() > 1e-8 {
                        return Err(validation(format!("window {s} integrates to {mass}, expected 1")));
                    }
                }
                Ok(())
            }
        }
    }

    fn snapshot_indices(grid: &SpaceTimeGrid, times: &[f64]) -> Vec<usize> {
        times.iter().map(|&t| grid.slice_index(t).expect("validated")).collect()
    }

    /// Sample times (one per data row).
    pub fn sample_times(&self, grid: &SpaceTimeGrid) -> Vec<f64> {
        match self {
            ObservationSpec::Snapshots { times } => times.clone(),
            _ => grid.times(),
        }
    }

    /// Shape `(rows, cols)` of the data array.
    pub fn data_shape(&self, grid: &SpaceTimeGrid) -> (usize, usize) {
        match self {
            ObservationSpec::Full => (grid.nt + 1, grid.nx),
            ObservationSpec::Snapshots { times } => (times.len(), grid.nx),
            ObservationSpec::Averages { windows } => (grid.nt + 1, windows.len()),
        }
    }

    /// Weight of one data entry in the `Y` inner product.
    fn entry_weight(&self, grid: &SpaceTimeGrid) -> f64 {
        match self {
            ObservationSpec::Full => grid.ht * grid.hx,
            ObservationSpec::Snapshots { .. } => grid.hx,
            ObservationSpec::Averages { .. } => grid.ht,
        }
    }

    pub fn inner_values(&self, grid: &SpaceTimeGrid, a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
        self.entry_weight(grid) * a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>()
    }

    pub fn norm_values(&self, grid: &SpaceTimeGrid, a: ArrayView2<f64>) -> f64 {
        self.inner_values(grid, a, a).max(0.0).sqrt()
    }

    /// `L u` as a raw array.
    pub fn apply(&self, disc: &Discretization, u: ArrayView2<f64>) -> Result<Array2<f64>> {
        let grid = disc.grid();
        self.validate(grid)?;
        if u.dim() != (grid.nt + 1, grid.nx) {
            return Err(shape(format!("state field has shape {:?}", u.dim())));
        }
        Ok(match self {
            ObservationSpec::Full => u.to_owned(),
            ObservationSpec::Snapshots { times } => {
                let idx = Self::snapshot_indices(grid, times);
                let mut y = Array2::zeros((idx.len(), grid.nx));
                for (m, &n) in idx.iter().enumerate() {
                    y.row_mut(m).assign(&u.row(n));
                }
                y
            }
            ObservationSpec::Averages { windows } => {
                let mut y = Array2::zeros((grid.nt + 1, windows.len()));
                for n in 0..=grid.nt {
                    for (s, w) in windows.iter().enumerate() {
                        y[[n, s]] = grid.hx * w.iter().zip(u.row(n).iter()).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                y
            }
        })
    }

    /// `L* r` with respect to `CalU` and `Y`.
    pub fn apply_adjoint(&self, disc: &Discretization, r: ArrayView2<f64>) -> Result<StateField> {
        let grid = disc.grid();
        self.validate(grid)?;
        if r.dim() != self.data_shape(grid) {
            return Err(shape(format!(
                "data has shape {:?}, expected {:?}",
                r.dim(),
                self.data_shape(grid)
            )));
        }
        let (nt, nx, hx, ht) = (grid.nt, grid.nx, grid.hx, grid.ht);
        let mut v = Array2::zeros((nt + 1, nx));
        match self {
            ObservationSpec::Full => {
                for n in 0..=nt {
                    let g: Vec<f64> = r.row(n).iter().map(|x| hx * x).collect();
                    v.row_mut(n).assign(&Array1::from(disc.riesz_solve(&g)));
                }
            }
            ObservationSpec::Snapshots { times } => {
                for (m, &n) in Self::snapshot_indices(grid, times).iter().enumerate() {
                    let g: Vec<f64> = r.row(m).iter().map(|x| hx * x / ht).collect();
                    let sol = Array1::from(disc.riesz_solve(&g));
                    let mut row = v.row_mut(n);
                    row += &sol;
                }
            }
            ObservationSpec::Averages { windows } => {
                for n in 0..=nt {
                    let mut g = vec![0.0; nx];
                    for (s, w) in windows.iter().enumerate() {
                        for i in 0..nx {
                            g[i] += hx * r[[n, s]] * w[i];
                        }
                    }
                    v.row_mut(n).assign(&Array1::from(disc.riesz_solve(&g)));
                }
            }
        }
        Ok(v)
    }
}

/// Observed data together with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationData {
    pub spec: ObservationSpec,
    pub times: Vec<f64>,
    pub values: Array2<f64>,
    pub delta: f64,
    pub seed: Option<u64>,
}

impl ObservationData {
    pub fn inner(&self, other: &ObservationData, disc: &Discretization) -> Result<f64> {
        if self.spec != other.spec || self.values.dim() != other.values.dim() {
            return Err(validation("observation data from different specs"));
        }
        Ok(self.spec.inner_values(disc.grid(), self.values.view(), other.values.view()))
    }

    pub fn norm(&self, disc: &Discretization) -> f64 {
        self.spec.norm_values(disc.grid(), self.values.view())
    }

    /// Write one row per time sample: `time, y_0, ..., y_{m-1}`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["time".to_string()];
        header.extend((0..self.values.ncols()).map(|j| format!("y_{j}")));
        wtr.write_record(&header)?;
        for (t, row) in self.times.iter().zip(self.values.outer_iter()) {
            let mut rec = vec![format!("{t:e}")];
            rec.extend(row.iter().map(|v| format!("{v:e}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Read values written by [`Self::write_csv`]; spec, noise level and seed
    /// come from the sidecar.
    pub fn read_csv<R: Read>(r: R, sidecar: &ObservationSidecar) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut times = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.parse::<f64>()).collect();
            let vals = vals.map_err(|e| validation(format!("bad number in CSV: {e}")))?;
            if vals.is_empty() {
                continue;
            }
            times.push(vals[0]);
            rows.push(vals[1..].to_vec());
        }
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(shape("ragged CSV rows"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let values = Array2::from_shape_vec((times.len(), ncols), flat).map_err(|e| shape(e.to_string()))?;
        Ok(Self {
            spec: sidecar.spec.clone(),
            times,
            values,
            delta: sidecar.delta,
            seed: sidecar.seed,
        })
    }

    pub fn sidecar(&self) -> ObservationSidecar {
        ObservationSidecar {
            spec: self.spec.clone(),
            delta: self.delta,
            seed: self.seed,
        }
    }
}

/// JSON metadata stored next to an observation CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSidecar {
    pub spec: ObservationSpec,
    pub delta: f64,
    pub seed: Option<u64>,
}

/// Exact (noise-free) observation of a state.
pub fn observe(disc: &Discretization, u: ArrayView2<f64>, spec: &ObservationSpec) -> Result<ObservationData> {
    let values = spec.apply(disc, u)?;
    Ok(ObservationData {
        spec: spec.clone(),
        times: spec.sample_times(disc.grid()),
        values,
        delta: 0.0,
        seed: None,
    })
}

/// `L* r`.
pub fn observe_adjoint(disc: &Discretization, r: ArrayView2<f64>, spec: &ObservationSpec) -> Result<StateField> {
    spec.apply_adjoint(disc, r)
}

/// Gaussian noise rescaled so that `||y_delta - y||_Y = delta` exactly.
pub fn add_noise(disc: &Discretization, y: &ObservationData, delta: f64, seed: u64) -> Result<ObservationData> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(validation(format!("noise level must be >= 0, got {delta}")));
    }
    let mut out = y.clone();
    out.delta = delta;
    out.seed = Some(seed);
    if delta == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Array2::from_shape_simple_fn(y.values.raw_dim(), || StandardNormal.sample(&mut rng));
    let nn: f64 = y.spec.norm_values(disc.grid(), noise.view());
    out.values.scaled_add(delta / nn, &noise);
    Ok(out)
}
