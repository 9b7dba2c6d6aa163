//! Expansion of odd functions in the basis `{ζ₀, ζ₁, ζ₂, …}`.
//!
//! The basis is orthonormal for `⟨·,·⟩` only on `span{ζ_k : k ≥ 2}`; `ζ₁`
//! is null and `ζ₀` pairs with it. Coefficients are therefore recovered as
//!
//! * `a_k = ⟨ζ, ζ_k⟩` for `k ≥ 2`,
//! * `a₀ = ⟨ζ, ζ₀⟩ / ⟨ζ₀, ζ₀⟩`,
//! * `a₁ = (1/π) ∫ (ζ − ζ̄) cos(φ/2)` with `ζ̄ = a₀ζ₀ + Σ_{k≥2} a_k ζ_k`.
//!
//! The first two are the bounded functionals left unspecified by the theory;
//! this is one admissible choice.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cylinder::CylinderField;
use crate::error::{Error, Result};
use crate::numerics::{Grid1D, Parity, SampledFunction1D, PARITY_TOL};
use crate::ventsel::{zeta0, zeta1, VentselSpectrum};

/// Coefficients `(a₀, a₁, a₂, …, a_K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficients {
    pub a0: f64,
    pub a1: f64,
    /// `a[i]` is the coefficient of `ζ_{i+2}`.
    pub a: Vec<f64>,
    /// `H¹` norm of `ζ − reconstruct(coefficients)` when produced by [`expand`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_error: Option<f64>,
}

impl ModeCoefficients {
    pub fn new(a0: f64, a1: f64, a: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Domain("need at least one coefficient with k ≥ 2".into()));
        }
        if !(a0.is_finite() && a1.is_finite() && a.iter().all(|x| x.is_finite())) {
            return Err(Error::Domain("non-finite coefficient".into()));
        }
        Ok(Self { a0, a1, a, truncation_error: None })
    }

    pub fn zeros(k_max: usize) -> Self {
        Self { a0: 0.0, a1: 0.0, a: vec![0.0; k_max.saturating_sub(1).max(1)], truncation_error: None }
    }

    /// Largest mode index `K`.
    pub fn k_max(&self) -> usize {
        self.a.len() + 1
    }

    /// Coefficient of `ζ_k`.
    pub fn get(&self, k: usize) -> f64 {
        match k {
            0 => self.a0,
            1 => self.a1,
            _ => self.a.get(k - 2).copied().unwrap_or(0.0),
        }
    }

    /// Pairs `(k, a_k)` for `k = 0..=K`.
    pub fn indexed(&self) -> Vec<(usize, f64)> {
        (0..=self.k_max()).map(|k| (k, self.get(k))).collect()
    }

    /// `Σ_{k≥2} a_k²`.
    pub fn tail_energy(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let k = self.k_max().max(other.k_max());
        (0..=k).map(|i| (self.get(i) - other.get(i)).abs()).fold(0.0, f64::max)
    }
}

fn require_odd(zeta: &SampledFunction1D) -> Result<()> {
    if zeta.parity() == Parity::Even {
        return Err(Error::Parity("expansion needs an odd function, got one declared even".into()));
    }
    let probe = SampledFunction1D::new_unchecked(*zeta.grid(), zeta.values().to_vec(), Parity::Odd);
    probe.check_parity(PARITY_TOL)
}

/// Coefficients of `zeta` in modes `0..=k_max`.
pub fn expand(sp: &VentselSpectrum, zeta: &SampledFunction1D, k_max: usize) -> Result<ModeCoefficients> {
    if k_max < 2 {
        return Err(Error::Domain(format!("K = {k_max}, need K ≥ 2")));
    }
    if k_max > sp.k_max() {
        return Err(Error::Domain(format!("K = {k_max} exceeds the {} computed modes", sp.k_max())));
    }
    if zeta.grid() != sp.grid() {
        return Err(Error::GridMismatch);
    }
    require_odd(zeta)?;
    let ctx = sp.context();
    let u = zeta.values();
    let du = ctx.derivative(zeta, 1)?.into_values();
    let a: Vec<f64> = (2..=k_max).map(|k| sp.form_with_mode(u, &du, k)).collect();
    let a0 = sp.form_with_mode(u, &du, 0) / sp.zeta0_norm();

    let mut resid = u.to_vec();
    let mut dresid = du.clone();
    subtract_mode(sp, &mut resid, &mut dresid, 0, a0);
    for (i, &ak) in a.iter().enumerate() {
        subtract_mode(sp, &mut resid, &mut dresid, i + 2, ak);
    }
    let z1 = sp.mode(1).profile.values();
    let a1 = ctx.integral(&resid.iter().zip(z1).map(|(r, c)| r * c).collect::<Vec<_>>()) / PI;

    subtract_mode(sp, &mut resid, &mut dresid, 1, a1);
    let l2: f64 = ctx.integral(&resid.iter().map(|r| r * r).collect::<Vec<_>>());
    let h1: f64 = ctx.integral(&dresid.iter().map(|r| r * r).collect::<Vec<_>>());

    let mut c = ModeCoefficients::new(a0, a1, a)?;
    c.truncation_error = Some((l2 + h1).sqrt());
    Ok(c)
}

fn subtract_mode(sp: &VentselSpectrum, u: &mut [f64], du: &mut [f64], k: usize, a: f64) {
    if a == 0.0 {
        return;
    }
    let prof = sp.mode(k).profile.values();
    let d = sp.mode_derivative(k);
    for ((x, dx), (p, dp)) in u.iter_mut().zip(du.iter_mut()).zip(prof.iter().zip(d)) {
        *x -= a * p;
        *dx -= a * dp;
    }
}

/// `Σ a_k ζ_k` on the spectrum's own grid.
pub fn reconstruct_sampled(sp: &VentselSpectrum, c: &ModeCoefficients) -> Result<SampledFunction1D> {
    if c.k_max() > sp.k_max() {
        return Err(Error::Domain(format!("coefficients up to {} but only {} modes", c.k_max(), sp.k_max())));
    }
    let g = *sp.grid();
    let mut vals = vec![0.0; g.n()];
    for (k, ak) in c.indexed() {
        if ak == 0.0 {
            continue;
        }
        for (v, p) in vals.iter_mut().zip(sp.mode(k).profile.values()) {
            *v += ak * p;
        }
    }
    Ok(SampledFunction1D::new_unchecked(g, vals, Parity::Odd))
}

/// `Σ a_k ζ_k` evaluated in closed form on any grid, using the spectrum's `ν_k`, `c_k`.
pub fn reconstruct(sp: &VentselSpectrum, c: &ModeCoefficients, grid: Grid1D) -> Result<SampledFunction1D> {
    if c.k_max() > sp.k_max() {
        return Err(Error::Domain(format!("coefficients up to {} but only {} modes", c.k_max(), sp.k_max())));
    }
    let vals = grid.nodes().iter().map(|&p| evaluate(sp, c, p)).collect();
    Ok(SampledFunction1D::new_unchecked(grid, vals, Parity::Odd))
}

/// Closed-form value of the expansion at one angle.
pub fn evaluate(sp: &VentselSpectrum, c: &ModeCoefficients, phi: f64) -> f64 {
    let mut s = c.a0 * zeta0(phi) + c.a1 * zeta1(phi);
    for (i, ak) in c.a.iter().enumerate() {
        let k = i + 2;
        s += ak * sp.c(k) * (sp.nu(k) * (phi - PI)).sin();
    }
    s
}

/// Even and odd parts about `φ = π`: `h = h^e + h^o` exactly.
pub fn parity_split(h: &CylinderField) -> Result<(CylinderField, CylinderField)> {
    let pg = h.grid().phi;
    if (0.5 * (pg.lo() + pg.hi()) - PI).abs() > 1e-12 {
        return Err(Error::InvalidGrid("φ-grid is not symmetric about π".into()));
    }
    let np = h.n_phi();
    let mut even = Vec::with_capacity(h.values().len());
    let mut odd = Vec::with_capacity(h.values().len());
    for j in 0..h.n_t() {
        let row = h.row(j);
        for i in 0..np {
            let (a, b) = (row[i], row[np - 1 - i]);
            let e = 0.5 * (a + b);
            even.push(e);
            odd.push(a - e);
        }
    }
    Ok((CylinderField::new(*h.grid(), even)?, CylinderField::new(*h.grid(), odd)?))
}
