//! Flat tori `ℝ^d / ∏ L_a ℤ` sampled on uniform grids, with Fourier
//! differentiation and the heat, DeTurck and parabolic-norm machinery built
//! on top.

pub mod deturck;
pub mod heat;
pub mod io;
pub mod norms;
mod spectral;
mod sup;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use deturck::{
    coupled_drift_heat, deturck_rhs, fixed_point_solve, pde_residual, picard_map, verify_derivative_decay, DecayReport,
    DriftHeatSolution, FixedPointOptions, FixedPointResult,
};
pub use heat::{
    field_norms, hessian_window, solve_heat, verify_gradient_monotone, verify_hessian_bound, verify_holder,
    verify_holder_series, FieldNorms,
    HeatSolution, HessianReport, HolderReport, MonotoneReport,
};
pub use io::{Snapshot, SnapshotHeader};
pub use norms::{parabolic_norm, x_norm, NormOptions, ParabolicNormSpec};

pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    resolution: Vec<usize>,
    periods: Vec<f64>,
}

impl TorusGrid {
    /// `d`-dimensional torus with `resolution` nodes and period 2π per axis.
    pub fn new(d: usize, resolution: usize) -> Result<Self> {
        Self::with_periods(vec![resolution; d], vec![2.0 * PI; d])
    }

    pub fn with_periods(resolution: Vec<usize>, periods: Vec<f64>) -> Result<Self> {
        let d = resolution.len();
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        if periods.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: periods.len(),
            });
        }
        for &r in &resolution {
            if r < MIN_RESOLUTION || !r.is_power_of_two() {
                return Err(Error::InvalidParameter(format!(
                    "resolution must be a power of two ≥ {MIN_RESOLUTION}, got {r}"
                )));
            }
        }
        for &p in &periods {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidParameter(format!("period must be > 0, got {p}")));
            }
        }
        Ok(Self { resolution, periods })
    }

    pub fn d(&self) -> usize {
        self.resolution.len()
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.periods[axis] / self.resolution[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.d()).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.periods.iter().product()
    }

    /// Multi-index of a node; the last axis varies fastest.
    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.d()).rev() {
            out[a] = idx % self.resolution[a];
            idx /= self.resolution[a];
        }
        out
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        let mut idx = 0;
        for a in 0..self.d() {
            idx = idx * self.resolution[a] + mi[a];
        }
        idx
    }

    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let mi = self.multi_index(idx);
        let mut x = [0.0; 3];
        for a in 0..self.d() {
            x[a] = mi[a] as f64 * self.spacing(a);
        }
        x
    }

    fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self != other {
            return Err(Error::InvalidParameter("fields live on different grids".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Self {
        Self {
            values: vec![c; grid.len()],
            grid: grid.clone(),
        }
    }

    /// Samples `f` at every node; `f` receives the first `d` coordinates.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.d();
        let values = (0..grid.len()).map(|i| f(&grid.coords(i)[..d])).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Random real field with Fourier modes `|m_a| ≤ max_mode` and Gaussian
    /// coefficients of variance `1/(1+|m|²)²`.
    pub fn random_band_limited<R: rand::Rng + ?Sized>(grid: &TorusGrid, max_mode: usize, rng: &mut R) -> Result<Self> {
        use rand_distr::{Distribution, StandardNormal};
        let d = grid.d();
        for &r in grid.resolution() {
            if 2 * max_mode >= r {
                return Err(Error::InvalidParameter(format!(
                    "max_mode {max_mode} not resolved at resolution {r}"
                )));
            }
        }
        let m = max_mode as i64;
        let side = 2 * max_mode + 1;
        let mut terms = Vec::new();
        for flat in 0..side.pow(d as u32) {
            let mut k = [0i64; 3];
            let mut rest = flat;
            for a in (0..d).rev() {
                k[a] = (rest % side) as i64 - m;
                rest /= side;
            }
            // One representative per ±k pair; the constant mode is skipped.
            let first = k[..d].iter().find(|&&v| v != 0);
            if !matches!(first, Some(&v) if v > 0) {
                continue;
            }
            let k2: i64 = k[..d].iter().map(|v| v * v).sum();
            let amp = 1.0 / (1.0 + k2 as f64);
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            terms.push((k, amp * a, amp * b));
        }
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.coords(i);
                terms
                    .iter()
                    .map(|(k, a, b)| {
                        let phase: f64 = (0..d)
                            .map(|ax| k[ax] as f64 * 2.0 * PI / grid.periods()[ax] * x[ax])
                            .sum();
                        a * phase.cos() + b * phase.sin()
                    })
                    .sum()
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn minus(&self, other: &ScalarField) -> Result<ScalarField> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// Field translated by whole grid cells: `v(x) = u(x − shift·h)`.
    pub fn translated(&self, shift: &[isize]) -> ScalarField {
        let g = &self.grid;
        let mut values = vec![0.0; g.len()];
        for (i, v) in values.iter_mut().enumerate() {
            let mi = g.multi_index(i);
            let mut src = [0usize; 3];
            for a in 0..g.d() {
                let n = g.resolution()[a] as isize;
                src[a] = (mi[a] as isize - shift[a]).rem_euclid(n) as usize;
            }
            *v = self.values[g.flat_index(&src)];
        }
        Self {
            grid: g.clone(),
            values,
        }
    }
}

/// Number of independent components of a symmetric `d × d` tensor.
pub fn sym_components(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Component slot of `(i, j)` in the order (0,0), (0,1), …, (1,1), ….
pub fn sym_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * d - i * (i + 1) / 2 + j
}

/// Symmetric 2-tensor field, one sample array per component `(i ≤ j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    grid: TorusGrid,
    comps: Vec<Vec<f64>>,
}

impl SymTensorField {
    pub fn new(grid: TorusGrid, comps: Vec<Vec<f64>>) -> Result<Self> {
        let c = sym_components(grid.d());
        if comps.len() != c {
            return Err(Error::DimensionMismatch {
                expected: c,
                actual: comps.len(),
            });
        }
        for v in &comps {
            if v.len() != grid.len() {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    actual: v.len(),
                });
            }
        }
        Ok(Self { grid, comps })
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self {
            comps: vec![vec![0.0; grid.len()]; sym_components(grid.d())],
            grid: grid.clone(),
        }
    }

    /// `f(x)·(dx_i ⊗ dx_j)` symmetrized, i.e. both `(i,j)` and `(j,i)`
    /// entries equal `f`.
    pub fn single(grid: &TorusGrid, i: usize, j: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let d = grid.d();
        if i >= d || j >= d {
            return Err(Error::InvalidParameter(format!("component ({i},{j}) out of range for d={d}")));
        }
        let mut out = Self::zeros(grid);
        out.comps[sym_index(d, i, j)] = ScalarField::from_fn(grid, f).into_values();
        Ok(out)
    }

    /// `c·g` for the flat metric `g`.
    pub fn scaled_identity(grid: &TorusGrid, c: f64) -> Self {
        let d = grid.d();
        let mut out = Self::zeros(grid);
        for i in 0..d {
            out.comps[sym_index(d, i, i)] = vec![c; grid.len()];
        }
        out
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn component(&self, i: usize, j: usize) -> &[f64] {
        &self.comps[sym_index(self.grid.d(), i, j)]
    }

    /// The `d × d` matrix at node `idx`.
    pub fn at(&self, idx: usize) -> [[f64; 3]; 3] {
        let d = self.grid.d();
        let mut m = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                m[i][j] = self.comps[sym_index(d, i, j)][idx];
            }
        }
        m
    }

    /// Pointwise Frobenius norm with respect to the flat metric.
    pub fn pointwise_norm(&self) -> Vec<f64> {
        let d = self.grid.d();
        (0..self.grid.len())
            .map(|idx| {
                let mut s = 0.0;
                for i in 0..d {
                    for j in i..d {
                        let v = self.comps[sym_index(d, i, j)][idx];
                        s += if i == j { v * v } else { 2.0 * v * v };
                    }
                }
                s.sqrt()
            })
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.pointwise_norm().into_iter().fold(0.0, f64::max)
    }

    pub fn axpy(&mut self, a: f64, x: &SymTensorField) {
        for (c, xc) in self.comps.iter_mut().zip(&x.comps) {
            for (v, w) in c.iter_mut().zip(xc) {
                *v += a * w;
            }
        }
    }

    pub fn minus(&self, other: &SymTensorField) -> Result<SymTensorField> {
        self.grid.check_same(&other.grid)?;
        let mut out = self.clone();
        out.axpy(-1.0, other);
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> SymTensorField {
        let mut out = self.clone();
        for c in &mut out.comps {
            for v in c.iter_mut() {
                *v *= s;
            }
        }
        out
    }
}

/// Tensor fields at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<SymTensorField>,
}

impl TensorTrajectory {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn grid(&self) -> &TorusGrid {
        self.fields[0].grid()
    }

    pub fn sup_norm(&self) -> f64 {
        self.fields.iter().map(SymTensorField::sup_norm).fold(0.0, f64::max)
    }

    pub fn minus(&self, other: &TensorTrajectory) -> Result<TensorTrajectory> {
        if self.times != other.times {
            return Err(Error::InvalidParameter("trajectories use different time nodes".into()));
        }
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.minus(b))
            .collect::<Result<_>>()?;
        Ok(Self {
            times: self.times.clone(),
            fields,
        })
    }
}
