//! Grids, quadrature, finite differences and bracketed root finding.
//!
//! Everything here works on uniform grids. Quadrature is composite Simpson
//! (with a 3/8 panel when the node count is even); derivative stencils come
//! from Fornberg's recursion so that any order/accuracy pair is available,
//! with one-sided stencils of the same accuracy near the endpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest node count accepted by [`Grid1D`].
pub const MIN_NODES: usize = 8;

/// Default relative tolerance for parity checks.
pub const PARITY_TOL: f64 = 1e-10;

/// Default accuracy order of finite-difference stencils.
pub const DEFAULT_FD_ACCURACY: usize = 4;

/// Uniform grid on `[lo, hi]` with `n` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::GridTooSmall(n));
        }
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::InvalidGrid(format!("endpoints [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi, n })
    }

    /// Grid on `[0, 2π]`.
    pub fn angular(n: usize) -> Result<Self> {
        Self::new(0.0, 2.0 * std::f64::consts::PI, n)
    }

    /// Builds a grid from explicit nodes, checking uniform spacing to 1e-12 relative.
    pub fn from_nodes(nodes: &[f64]) -> Result<Self> {
        let n = nodes.len();
        if n < MIN_NODES {
            return Err(Error::GridTooSmall(n));
        }
        let g = Self::new(nodes[0], nodes[n - 1], n)?;
        let h = g.h();
        for (i, &x) in nodes.iter().enumerate() {
            if (x - g.node(i)).abs() > 1e-12 * h.max(x.abs()) {
                return Err(Error::InvalidGrid(format!("non-uniform node {i}: {x}")));
            }
        }
        Ok(g)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    /// Node `i`; the last node is exactly `hi`.
    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Index of the midpoint node, if the grid has one.
    pub fn mid_index(&self) -> Option<usize> {
        (self.n % 2 == 1).then_some(self.n / 2)
    }

    /// Same endpoints with `2(n-1)+1` nodes.
    pub fn refined(&self) -> Self {
        Self { n: 2 * (self.n - 1) + 1, ..*self }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Symmetry about the midpoint of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Odd,
    Even,
    None,
}

impl Parity {
    /// Parity of the `order`-th derivative.
    pub fn differentiated(self, order: usize) -> Parity {
        match (self, order % 2) {
            (p, 0) => p,
            (Parity::Odd, _) => Parity::Even,
            (Parity::Even, _) => Parity::Odd,
            (Parity::None, _) => Parity::None,
        }
    }

    /// Parity of a pointwise product.
    pub fn product(self, other: Parity) -> Parity {
        match (self, other) {
            (Parity::None, _) | (_, Parity::None) => Parity::None,
            (a, b) if a == b => Parity::Even,
            _ => Parity::Odd,
        }
    }

    fn sum(self, other: Parity) -> Parity {
        if self == other {
            self
        } else {
            Parity::None
        }
    }
}

/// Samples of a real function on a [`Grid1D`] with parity metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction1D {
    grid: Grid1D,
    values: Vec<f64>,
    parity: Parity,
}

impl SampledFunction1D {
    /// Checks the length and, for odd/even parity, the symmetry to [`PARITY_TOL`].
    pub fn new(grid: Grid1D, values: Vec<f64>, parity: Parity) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} nodes",
                values.len(),
                grid.n()
            )));
        }
        let f = Self { grid, values, parity };
        f.check_parity(PARITY_TOL)?;
        Ok(f)
    }

    /// No parity claim.
    pub fn plain(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values, Parity::None)
    }

    pub fn from_fn(grid: Grid1D, parity: Parity, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect(), parity)
    }

    pub fn zeros(grid: Grid1D, parity: Parity) -> Self {
        Self { grid, values: vec![0.0; grid.n()], parity }
    }

    pub(crate) fn new_unchecked(grid: Grid1D, values: Vec<f64>, parity: Parity) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values, parity }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest violation of the declared symmetry, relative to `max|values|`.
    pub fn parity_defect(&self) -> f64 {
        let n = self.values.len();
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let sign = match self.parity {
            Parity::Odd => 1.0,
            Parity::Even => -1.0,
            Parity::None => return 0.0,
        };
        (0..n)
            .map(|i| (self.values[i] + sign * self.values[n - 1 - i]).abs())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn check_parity(&self, tol: f64) -> Result<()> {
        let d = self.parity_defect();
        if d > tol {
            return Err(Error::Parity(format!(
                "declared {:?}, relative defect {d:.3e} exceeds {tol:.1e}",
                self.parity
            )));
        }
        Ok(())
    }

    /// Replaces the parity claim after checking it.
    pub fn with_parity(mut self, parity: Parity) -> Result<Self> {
        self.parity = parity;
        self.check_parity(PARITY_TOL)?;
        Ok(self)
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
        Ok(Self::new_unchecked(self.grid, values, self.parity.sum(other.parity)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::new_unchecked(self.grid, self.values.iter().map(|x| a * x).collect(), self.parity)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x * y).collect();
        Ok(Self::new_unchecked(self.grid, values, self.parity.product(other.parity)))
    }

    /// Pointwise map; the result carries no parity claim.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.values.iter().enumerate().map(|(i, &v)| f(self.grid.node(i), v)).collect();
        Self::new_unchecked(self.grid, values, Parity::None)
    }
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Composite Simpson weights; a closing 3/8 panel handles an even node count.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 4, "Simpson weights need at least 4 nodes");
    let mut w = vec![0.0; n];
    let simpson_end = if n % 2 == 1 { n - 1 } else { n - 4 };
    if simpson_end > 0 {
        for i in (0..simpson_end).step_by(2) {
            w[i] += h / 3.0;
            w[i + 1] += 4.0 * h / 3.0;
            w[i + 2] += h / 3.0;
        }
    }
    if n % 2 == 0 {
        let s = n - 4;
        for (j, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            w[s + j] += 3.0 * h / 8.0 * c;
        }
    }
    w
}

/// Composite Simpson integral of raw samples with spacing `h`.
pub fn integrate_values(values: &[f64], h: f64) -> f64 {
    simpson_weights(values.len(), h).iter().zip(values).map(|(w, v)| w * v).sum()
}

/// Integral of `f` over its grid.
pub fn integrate(f: &SampledFunction1D) -> f64 {
    integrate_values(f.values(), f.grid().h())
}

/// Integral of the pointwise product of two samples on the same grid.
pub fn integrate_product(f: &SampledFunction1D, g: &SampledFunction1D) -> Result<f64> {
    f.same_grid(g)?;
    let w = simpson_weights(f.values.len(), f.grid.h());
    Ok(w.iter().zip(f.values.iter().zip(&g.values)).map(|(w, (a, b))| w * a * b).sum())
}

/// Running integral `F[i] = ∫_{x_start}^{x_i} f`, fourth-order accurate.
///
/// Interior cells use the cubic through four neighbours; the two edge cells
/// use the one-sided cubic.
pub fn cumulative_integral(values: &[f64], h: f64, start: usize) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 4 && start < n);
    let f = values;
    let cell = |i: usize| -> f64 {
        if i == 0 {
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if i + 2 == n {
            h / 24.0 * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4])
        } else {
            h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
        }
    };
    let mut out = vec![0.0; n];
    for i in start..n - 1 {
        out[i + 1] = out[i] + cell(i);
    }
    for i in (0..start).rev() {
        out[i] = out[i + 1] - cell(i);
    }
    out
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    if m == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..(m + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre rule on `[a, b]`: `panels` panels of `points` nodes.
///
/// An open rule: no node sits on an endpoint, so integrands that are bounded
/// but not evaluable at an endpoint (crack faces, the tip) are fine.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn composite(a: f64, b: f64, panels: usize, points: usize) -> Self {
        let (x, w) = gauss_legendre(points);
        let len = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * points);
        let mut weights = Vec::with_capacity(panels * points);
        for p in 0..panels {
            let lo = a + p as f64 * len;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * len * (xi + 1.0));
                weights.push(0.5 * len * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// First index and weights of the 4-point Lagrange stencil around `x`.
pub fn lagrange4_weights(g: Grid1D, x: f64) -> (usize, [f64; 4]) {
    let h = g.h();
    let s = ((x - g.lo()) / h).clamp(0.0, (g.n() - 1) as f64);
    let base = (s.floor() as usize).saturating_sub(1).min(g.n() - 4);
    let u = s - base as f64;
    let nodes = [0.0, 1.0, 2.0, 3.0];
    let mut w = [1.0; 4];
    for (a, wa) in w.iter_mut().enumerate() {
        for (b, &xb) in nodes.iter().enumerate() {
            if a != b {
                *wa *= (u - xb) / (nodes[a] - xb);
            }
        }
    }
    (base, w)
}

/// Cubic Lagrange interpolation of grid samples; `None` outside the grid.
pub fn interpolate_cubic(g: Grid1D, values: &[f64], x: f64) -> Option<f64> {
    if x < g.lo() - 1e-12 || x > g.hi() + 1e-12 || values.len() != g.n() {
        return None;
    }
    let (i, w) = lagrange4_weights(g, x);
    Some(w.iter().enumerate().map(|(a, wa)| wa * values[i + a]).sum())
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Fornberg weights for the `m`-th derivative at `z` from the nodes `x`.
pub fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    assert!(n > m, "need more nodes than the derivative order");
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Derivative stencils for a fixed grid size, order and accuracy.
///
/// Interior rows are centred; rows within half a stencil of an end use the
/// `accuracy + order` nodes nearest that end.
#[derive(Debug, Clone, PartialEq)]
pub struct FdStencil {
    n: usize,
    order: usize,
    half: usize,
    interior: Vec<f64>,
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
    width: usize,
}

impl FdStencil {
    pub fn new(n: usize, order: usize, accuracy: usize) -> Result<Self> {
        if order == 0 || order > 4 {
            return Err(Error::DerivativeOrder(order));
        }
        if accuracy < 2 || accuracy % 2 == 1 {
            return Err(Error::Numerical(format!("FD accuracy must be even and ≥ 2, got {accuracy}")));
        }
        let half = (accuracy + order - 1) / 2;
        let width = accuracy + order;
        if n < width.max(2 * half + 1) {
            return Err(Error::GridTooSmall(n));
        }
        let centred: Vec<f64> = (0..=2 * half).map(|j| j as f64 - half as f64).collect();
        let interior = fornberg_weights(0.0, &centred, order);
        let offsets: Vec<f64> = (0..width).map(|j| j as f64).collect();
        let left = (0..half).map(|i| fornberg_weights(i as f64, &offsets, order)).collect();
        let right = (0..half)
            .map(|i| fornberg_weights((width - 1 - i) as f64, &offsets, order))
            .collect();
        Ok(Self { n, order, half, interior, left, right, width })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Derivative at node `i` of `values` (stride `stride`, starting at `offset`).
    #[inline]
    pub fn at_strided(&self, values: &[f64], offset: usize, stride: usize, i: usize, h: f64) -> f64 {
        let n = self.n;
        let get = |j: usize| values[offset + j * stride];
        let s: f64 = if i < self.half {
            self.left[i].iter().enumerate().map(|(j, w)| w * get(j)).sum()
        } else if i + self.half >= n {
            let k = n - 1 - i;
            let base = n - self.width;
            self.right[k].iter().enumerate().map(|(j, w)| w * get(base + j)).sum()
        } else {
            let base = i - self.half;
            self.interior.iter().enumerate().map(|(j, w)| w * get(base + j)).sum()
        };
        s / h.powi(self.order as i32)
    }

    pub fn at(&self, values: &[f64], i: usize, h: f64) -> f64 {
        self.at_strided(values, 0, 1, i, h)
    }

    pub fn apply(&self, values: &[f64], h: f64) -> Vec<f64> {
        assert_eq!(values.len(), self.n);
        (0..self.n).map(|i| self.at(values, i, h)).collect()
    }
}

/// Derivative of order 1 or 2 with fourth-order stencils.
pub fn differentiate(f: &SampledFunction1D, order: usize) -> Result<SampledFunction1D> {
    differentiate_with(f, order, DEFAULT_FD_ACCURACY)
}

/// Derivative of order 1 or 2 with stencils of the given accuracy.
pub fn differentiate_with(f: &SampledFunction1D, order: usize, accuracy: usize) -> Result<SampledFunction1D> {
    if !(1..=2).contains(&order) {
        return Err(Error::DerivativeOrder(order));
    }
    let st = FdStencil::new(f.grid.n(), order, accuracy)?;
    let values = st.apply(&f.values, f.grid.h());
    Ok(SampledFunction1D::new_unchecked(f.grid, values, f.parity.differentiated(order)))
}

// ---------------------------------------------------------------------------
// Root finding and fits
// ---------------------------------------------------------------------------

/// Interval `[a, b]` on which a target function changes sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootBracket {
    pub a: f64,
    pub b: f64,
}

impl RootBracket {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::Domain(format!("bracket [{a}, {b}] is empty")));
        }
        Ok(Self { a, b })
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }
}

/// Bisection. Returns the midpoint of the final bracket, whose width is ≤ `tol`.
pub fn find_root(f: impl Fn(f64) -> f64, bracket: RootBracket, tol: f64) -> Result<f64> {
    Ok(bisect(f, bracket, tol)?.0)
}

/// Bisection returning the root estimate and the final bracket.
pub fn bisect(f: impl Fn(f64) -> f64, bracket: RootBracket, tol: f64) -> Result<(f64, RootBracket)> {
    if !(tol > 0.0) {
        return Err(Error::Tolerance(tol));
    }
    let (mut a, mut b) = (bracket.a, bracket.b);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok((a, RootBracket { a, b: a }));
    }
    if fb == 0.0 {
        return Ok((b, RootBracket { a: b, b }));
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoSignChange { a, b });
    }
    let sa = fa.signum();
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok((m, RootBracket { a: m, b: m }));
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b), RootBracket { a, b }))
}

/// Least-squares line `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Numerical("linear fit needs at least two matching points".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("linear fit with coincident abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ang(n: usize) -> Grid1D {
        Grid1D::angular(n).unwrap()
    }

    #[test]
    fn grid_rejects_small_and_reversed() {
        assert_eq!(Grid1D::new(0.0, 1.0, 7), Err(Error::GridTooSmall(7)));
        assert!(Grid1D::new(1.0, 0.0, 9).is_err());
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        assert_eq!(g.node(10), 1.0);
        assert!(Grid1D::from_nodes(&g.nodes()).is_ok());
        let mut bad = g.nodes();
        bad[3] += 1e-6;
        assert!(Grid1D::from_nodes(&bad).is_err());
    }

    #[test]
    fn simpson_half_angle_square() {
        let f = SampledFunction1D::from_fn(ang(2049), Parity::Even, |p| (p / 2.0).sin().powi(2)).unwrap();
        assert!((integrate(&f) - PI).abs() < 1e-12);
    }

    #[test]
    fn simpson_sin_minus_shifted_cos() {
        let f = SampledFunction1D::from_fn(ang(2049), Parity::Even, |p| {
            p.sin().powi(2) - (1.0 + p.cos()).powi(2)
        })
        .unwrap();
        assert!((integrate(&f) + 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn simpson_even_node_count_uses_three_eighths() {
        let g = Grid1D::new(0.0, 1.0, 64).unwrap();
        let f = SampledFunction1D::from_fn(g, Parity::None, |x| x.powi(3) + x.exp()).unwrap();
        let exact = 0.25 + 1f64.exp() - 1.0;
        assert!((integrate(&f) - exact).abs() < 1e-8);
        let g = Grid1D::new(0.0, 1.0, 128).unwrap();
        let f2 = SampledFunction1D::from_fn(g, Parity::None, |x| x.powi(3) + x.exp()).unwrap();
        let rate = ((integrate(&f) - exact) / (integrate(&f2) - exact)).abs().log2();
        assert!(rate > 3.8, "rate {rate}");
    }

    #[test]
    fn zero_integrand() {
        assert_eq!(integrate(&SampledFunction1D::zeros(ang(33), Parity::Odd)), 0.0);
    }

    #[test]
    fn derivative_of_half_cosine() {
        let g = ang(1025);
        let f = SampledFunction1D::from_fn(g, Parity::Odd, |p| (p / 2.0).cos()).unwrap();
        let d = differentiate(&f, 1).unwrap();
        assert_eq!(d.parity(), Parity::Even);
        for (i, v) in d.values().iter().enumerate() {
            assert!((v + 0.5 * (g.node(i) / 2.0).sin()).abs() < 1e-10, "node {i}");
        }
    }

    #[test]
    fn second_derivative_of_zeta0() {
        let g = ang(1025);
        let f = SampledFunction1D::from_fn(g, Parity::Odd, |p| (p - PI) * (p / 2.0).sin()).unwrap();
        let d = differentiate(&f, 2).unwrap();
        assert_eq!(d.parity(), Parity::Odd);
        for (i, v) in d.values().iter().enumerate() {
            let p = g.node(i);
            let exact = -(p - PI) / 4.0 * (p / 2.0).sin() + (p / 2.0).cos();
            assert!((v - exact).abs() < 1e-8, "node {i}: {v} vs {exact}");
        }
    }

    #[test]
    fn derivative_of_constant_and_bad_order() {
        let f = SampledFunction1D::from_fn(ang(65), Parity::Even, |_| 3.5).unwrap();
        assert!(differentiate(&f, 1).unwrap().max_abs() < 1e-12);
        assert_eq!(differentiate(&f, 3), Err(Error::DerivativeOrder(3)));
        assert_eq!(differentiate(&f, 0), Err(Error::DerivativeOrder(0)));
    }

    #[test]
    fn fornberg_reproduces_known_stencils() {
        let w = fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let exact = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(exact) {
            assert!((a - b).abs() < 1e-14);
        }
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn stencils_converge_at_requested_order() {
        for acc in [2, 4, 6] {
            let err = |n: usize| {
                let g = Grid1D::new(0.0, 1.0, n).unwrap();
                let f = SampledFunction1D::from_fn(g, Parity::None, |x| (3.0 * x).sin()).unwrap();
                let d = differentiate_with(&f, 1, acc).unwrap();
                d.values()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v - 3.0 * (3.0 * g.node(i)).cos()).abs())
                    .fold(0.0, f64::max)
            };
            let rate = (err(41) / err(81)).log2();
            assert!((rate - acc as f64).abs() < 0.6, "acc {acc}: rate {rate}");
        }
    }

    #[test]
    fn cumulative_integral_is_fourth_order() {
        let err = |n: usize| {
            let g = Grid1D::angular(n).unwrap();
            let vals: Vec<f64> = g.nodes().iter().map(|p| (1.3 * p).cos()).collect();
            let mid = n / 2;
            let c = cumulative_integral(&vals, g.h(), mid);
            c.iter()
                .enumerate()
                .map(|(i, v)| (v - ((1.3 * g.node(i)).sin() - (1.3 * PI).sin()) / 1.3).abs())
                .fold(0.0, f64::max)
        };
        let rate = (err(65) / err(129)).log2();
        assert!(rate > 3.7, "rate {rate}");
        assert!(err(2049) < 1e-10, "{}", err(2049));
    }

    #[test]
    fn gauss_legendre_exact_on_polynomials() {
        for m in [1, 2, 5, 12] {
            let (x, w) = gauss_legendre(m);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            let deg = 2 * m - 1;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((q - exact).abs() < 1e-13, "m {m}");
        }
        let rule = GaussRule::composite(0.0, PI, 4, 8);
        assert!((rule.integrate(f64::sin) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bisection_examples() {
        let br = RootBracket::new(1.0, 2.0).unwrap();
        let (x, fin) = bisect(|x| x * x - 2.0, br, 1e-12).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-12);
        assert!(fin.width() <= 1e-12);
        let x = find_root(|x| x, RootBracket::new(-1.0, 1.0).unwrap(), 1e-12).unwrap();
        assert!(x.abs() < 1e-12);
        assert!(matches!(find_root(|x| x * x + 1.0, br, 1e-9), Err(Error::NoSignChange { .. })));
        assert_eq!(find_root(|x| x, br, 0.0), Err(Error::Tolerance(0.0)));
    }

    #[test]
    fn parity_validation() {
        let g = ang(65);
        assert!(SampledFunction1D::from_fn(g, Parity::Odd, |p| (p - PI).sin()).is_ok());
        assert!(SampledFunction1D::from_fn(g, Parity::Odd, |p| (p / 2.0).sin()).is_err());
        assert!(SampledFunction1D::from_fn(g, Parity::Even, |p| (p / 2.0).sin()).is_ok());
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|t| -1.5 * t + 0.25).collect();
        let (s, c) = linear_fit(&x, &y).unwrap();
        assert!((s + 1.5).abs() < 1e-14 && (c - 0.25).abs() < 1e-14);
    }
}
