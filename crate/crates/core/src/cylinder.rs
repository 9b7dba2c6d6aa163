//! Sampled fields on the cylinder `[0, 2π] × [t₀, t₁]` (or any tensor grid).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{lagrange4_weights, FdStencil, Grid1D, Parity, SampledFunction1D, DEFAULT_FD_ACCURACY};

/// Tensor grid: angle `φ` times a second coordinate (`t` or `r`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderGrid {
    pub phi: Grid1D,
    pub t: Grid1D,
}

impl CylinderGrid {
    pub fn new(phi: Grid1D, t: Grid1D) -> Self {
        Self { phi, t }
    }

    /// `[0, 2π] × [t0, t1]` with `n_phi × n_t` nodes.
    pub fn log_polar(n_phi: usize, t0: f64, t1: f64, n_t: usize) -> Result<Self> {
        Ok(Self { phi: Grid1D::angular(n_phi)?, t: Grid1D::new(t0, t1, n_t)? })
    }

    pub fn len(&self) -> usize {
        self.phi.n() * self.t.n()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Values on a [`CylinderGrid`], stored row by row (one row per `t` node).
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderField {
    grid: CylinderGrid,
    values: Vec<f64>,
}

impl CylinderField {
    pub fn new(grid: CylinderGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: CylinderGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: CylinderGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let phis = grid.phi.nodes();
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.t.n() {
            let t = grid.t.node(j);
            values.extend(phis.iter().map(|&p| f(p, t)));
        }
        Self { grid, values }
    }

    /// Separable field `Σ_m a_m(t) p_m(φ)` from sampled factors.
    pub fn from_separable(grid: CylinderGrid, terms: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let (np, nt) = (grid.phi.n(), grid.t.n());
        let mut values = vec![0.0; grid.len()];
        for (time, prof) in terms {
            if time.len() != nt || prof.len() != np {
                return Err(Error::GridMismatch);
            }
            for j in 0..nt {
                let a = time[j];
                if a == 0.0 {
                    continue;
                }
                for (v, p) in values[j * np..(j + 1) * np].iter_mut().zip(prof) {
                    *v += a * p;
                }
            }
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &CylinderGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_phi(&self) -> usize {
        self.grid.phi.n()
    }

    pub fn n_t(&self) -> usize {
        self.grid.t.n()
    }

    /// Value at φ-node `i`, t-node `j`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n_phi() + i]
    }

    /// The φ-section at t-node `j`.
    pub fn row(&self, j: usize) -> &[f64] {
        let np = self.n_phi();
        &self.values[j * np..(j + 1) * np]
    }

    pub fn section(&self, j: usize, parity: Parity) -> Result<SampledFunction1D> {
        SampledFunction1D::new(self.grid.phi, self.row(j).to_vec(), parity)
    }

    /// Values along t at φ-node `i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.n_t()).map(|j| self.at(i, j)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| a * v).collect() }
    }

    /// Pointwise `f(φ, t, value)`.
    pub fn map(&self, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let np = self.n_phi();
        let phis = self.grid.phi.nodes();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, &v)| f(phis[idx % np], self.grid.t.node(idx / np), v))
            .collect();
        Self { grid: self.grid, values }
    }

    /// `∂^order/∂φ^order` with stencils of the given accuracy.
    pub fn d_phi_with(&self, order: usize, accuracy: usize) -> Result<Self> {
        let st = FdStencil::new(self.n_phi(), order, accuracy)?;
        let h = self.grid.phi.h();
        let np = self.n_phi();
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.n_t() {
            let row = &self.values[j * np..(j + 1) * np];
            values.extend((0..np).map(|i| st.at(row, i, h)));
        }
        Ok(Self { grid: self.grid, values })
    }

    /// `∂^order/∂t^order` with stencils of the given accuracy.
    pub fn d_t_with(&self, order: usize, accuracy: usize) -> Result<Self> {
        let st = FdStencil::new(self.n_t(), order, accuracy)?;
        let h = self.grid.t.h();
        let np = self.n_phi();
        let mut values = vec![0.0; self.values.len()];
        for i in 0..np {
            for j in 0..self.n_t() {
                values[j * np + i] = st.at_strided(&self.values, i, np, j, h);
            }
        }
        Ok(Self { grid: self.grid, values })
    }

    pub fn d_phi(&self, order: usize) -> Result<Self> {
        self.d_phi_with(order, DEFAULT_FD_ACCURACY)
    }

    pub fn d_t(&self, order: usize) -> Result<Self> {
        self.d_t_with(order, DEFAULT_FD_ACCURACY)
    }

    /// Mixed derivative `∂²/∂t∂φ`, composed from the two 1-D stencils.
    pub fn d_tphi(&self) -> Result<Self> {
        self.d_phi(1)?.d_t(1)
    }

    /// Bicubic Lagrange interpolation; `None` outside the grid.
    pub fn interpolate(&self, phi: f64, t: f64) -> Option<f64> {
        let (gp, gt) = (self.grid.phi, self.grid.t);
        let tol = 1e-12;
        if phi < gp.lo() - tol || phi > gp.hi() + tol || t < gt.lo() - tol || t > gt.hi() + tol {
            return None;
        }
        let (ip, wp) = lagrange4_weights(gp, phi);
        let (it, wt) = lagrange4_weights(gt, t);
        let mut s = 0.0;
        for (b, wb) in wt.iter().enumerate() {
            let row = self.row(it + b);
            for (a, wa) in wp.iter().enumerate() {
                s += wa * wb * row[ip + a];
            }
        }
        Some(s)
    }

    /// φ-section at an arbitrary `t`, by 4-point Lagrange interpolation in `t`.
    pub fn section_at(&self, t: f64) -> Option<Vec<f64>> {
        let gt = self.grid.t;
        if t < gt.lo() - 1e-12 || t > gt.hi() + 1e-12 {
            return None;
        }
        let (it, wt) = lagrange4_weights(gt, t);
        let mut out = vec![0.0; self.n_phi()];
        for (b, wb) in wt.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.row(it + b)) {
                *o += wb * v;
            }
        }
        Some(out)
    }

    /// Writes `phi,<second>,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, second: &str) -> Result<()> {
        writeln!(w, "phi,{second},value")?;
        for j in 0..self.n_t() {
            let t = self.grid.t.node(j);
            for i in 0..self.n_phi() {
                writeln!(w, "{:.17e},{:.17e},{:.17e}", self.grid.phi.node(i), t, self.at(i, j))?;
            }
        }
        Ok(())
    }
}
