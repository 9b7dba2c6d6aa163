//! The linearized pair system for `(v, λ)` on the cylinder.
//!
//! ```text
//! v_t − v_tt − v/4 − v_φφ = (λ̇ − λ̈) isq_φ        on (0, 2π) × (t₀, t₁)
//! v(0, t) = v(2π, t) = 0
//! λ̇ − λ̈ = 2√(2/π) v_φ(0, t)
//! ```
//!
//! with `isq_φ = cos(φ/2)/√(2π)`. Setting `ζ = v − λ isq_φ` turns it into
//! `ζ_t − ζ_tt = ζ/4 + ζ_φφ` with the Ventsel condition at `φ = 0`, so every
//! solution is a superposition of modes:
//!
//! * `a_k(t) = D_k e^{(½+ν_k)t} + C_k e^{(½−ν_k)t}` on `ζ_k`, `k ≥ 2`;
//! * the Jordan pair `a₀ = c₁ + c₂eᵗ`, `a₁ = b₁ + b₂eᵗ + c₁t − c₂teᵗ` on `ζ₀, ζ₁`.
//!
//! `λ = −√(2π) ζ(0, ·)`, and `v = ζ − ζ(0, ·) cos(φ/2)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cylinder::{CylinderField, CylinderGrid};
use crate::fields::isq_phi;
use crate::error::{Error, Result};
use crate::numerics::{
    integrate_values, interpolate_cubic, linear_fit, simpson_weights, FdStencil, Grid1D, DEFAULT_FD_ACCURACY,
};
use crate::ventsel::{zeta0, zeta1, VentselSpectrum};

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_2;

/// Tolerance on `v(0,t)`, `v(2π,t)` accepted by [`LinearizedTrajectory::new`].
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Stencil accuracy for the residual operators. Fourth order leaves mode 6
/// at 2e-5 on the default grid; sixth order brings it near 1e-7.
pub const RESIDUAL_FD_ACCURACY: usize = 6;

/// Default cylinder: 513 φ-nodes, 401 t-nodes on `[0, 4]`.
pub fn default_grid() -> CylinderGrid {
    CylinderGrid::log_polar(513, 0.0, 4.0, 401).expect("valid default grid")
}

/// How time derivatives were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    Analytic,
    FiniteDifference,
}

/// A function of `t` sampled with its first two derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub grid: Grid1D,
    pub value: Vec<f64>,
    pub dot: Vec<f64>,
    pub ddot: Vec<f64>,
    pub source: DerivativeSource,
}

impl TimeSeries {
    pub fn analytic(grid: Grid1D, f: impl Fn(f64) -> [f64; 3]) -> Self {
        let (mut value, mut dot, mut ddot) = (Vec::new(), Vec::new(), Vec::new());
        for t in grid.nodes() {
            let [a, b, c] = f(t);
            value.push(a);
            dot.push(b);
            ddot.push(c);
        }
        Self { grid, value, dot, ddot, source: DerivativeSource::Analytic }
    }

    /// Derivatives by finite differences of the samples.
    pub fn sampled(grid: Grid1D, value: Vec<f64>) -> Result<Self> {
        if value.len() != grid.n() {
            return Err(Error::GridMismatch);
        }
        let d1 = FdStencil::new(grid.n(), 1, DEFAULT_FD_ACCURACY)?.apply(&value, grid.h());
        let d2 = FdStencil::new(grid.n(), 2, DEFAULT_FD_ACCURACY)?.apply(&value, grid.h());
        Ok(Self { grid, value, dot: d1, ddot: d2, source: DerivativeSource::FiniteDifference })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self::analytic(grid, |_| [0.0; 3])
    }

    /// `[value, dot, ddot]` at an arbitrary `t` in range.
    pub fn at(&self, t: f64) -> Option<[f64; 3]> {
        Some([
            interpolate_cubic(self.grid, &self.value, t)?,
            interpolate_cubic(self.grid, &self.dot, t)?,
            interpolate_cubic(self.grid, &self.ddot, t)?,
        ])
    }

    pub fn negated(&self) -> Self {
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect();
        Self { grid: self.grid, value: neg(&self.value), dot: neg(&self.dot), ddot: neg(&self.ddot), source: self.source }
    }
}

/// `a_k(t) = D e^{(½+ν)t} + C e^{(½−ν)t}` for one mode `k ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSolution {
    pub k: usize,
    pub nu: f64,
    /// Normalization of the profile `ζ_k = c sin(ν(φ − π))`.
    pub c_norm: f64,
    /// Coefficient of the decaying exponential `e^{(½−ν)t}`.
    pub c: f64,
    /// Coefficient of the growing exponential `e^{(½+ν)t}`.
    pub d: f64,
}

impl CoefficientSolution {
    /// `[a, ȧ, ä]` at `t`.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let (p, m) = (0.5 + self.nu, 0.5 - self.nu);
        let (ep, em) = (self.d * (p * t).exp(), self.c * (m * t).exp());
        [ep + em, p * ep + m * em, p * p * ep + m * m * em]
    }

    /// `ä − ȧ − (ν² − ¼)a`.
    pub fn ode_residual(&self, t: f64) -> f64 {
        let [a, b, c] = self.eval(t);
        c - b - (self.nu * self.nu - 0.25) * a
    }

    /// Decay exponent `μ = ν − ½` of the `C` branch.
    pub fn mu(&self) -> f64 {
        self.nu - 0.5
    }

    /// `ζ_k(φ)`.
    pub fn profile(&self, phi: f64) -> f64 {
        self.c_norm * (self.nu * (phi - PI)).sin()
    }

    /// `ζ_k(0) = −c sin(νπ)`.
    pub fn profile_at_zero(&self) -> f64 {
        -self.c_norm * (self.nu * PI).sin()
    }
}

/// Mode `k ≥ 2` with the given `(C, D)`.
pub fn coefficient_solution(sp: &VentselSpectrum, k: usize, c: f64, d: f64) -> Result<CoefficientSolution> {
    if k < 2 {
        return Err(Error::Domain(format!("coefficient solutions need k ≥ 2, got {k}")));
    }
    if k > sp.k_max() {
        return Err(Error::Domain(format!("mode {k} beyond the {} computed", sp.k_max())));
    }
    if !(c.is_finite() && d.is_finite()) {
        return Err(Error::Domain("non-finite mode coefficient".into()));
    }
    Ok(CoefficientSolution { k, nu: sp.nu(k), c_norm: sp.c(k), c, d })
}

/// Coefficients of the Jordan pair: `a₀ = c₁ + c₂eᵗ`, `a₁ = b₁ + b₂eᵗ + c₁t − c₂teᵗ`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JordanPart {
    pub c1: f64,
    pub c2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl JordanPart {
    pub fn a0(&self, t: f64) -> [f64; 3] {
        let e = self.c2 * t.exp();
        [self.c1 + e, e, e]
    }

    pub fn a1(&self, t: f64) -> [f64; 3] {
        let et = t.exp();
        let b = self.b2 * et;
        let q = -self.c2 * et;
        // −c₂teᵗ and its derivatives: q·t, q(1+t), q(2+t)
        [self.b1 + b + self.c1 * t + q * t, b + self.c1 + q * (1.0 + t), b + q * (2.0 + t)]
    }
}

/// A finite modal solution of the linearized system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalSolution {
    pub jordan: JordanPart,
    pub modes: Vec<CoefficientSolution>,
}

impl ModalSolution {
    pub fn zero() -> Self {
        Self { jordan: JordanPart::default(), modes: Vec::new() }
    }

    /// `[λ, λ̇, λ̈]` from `λ = −√(2π)(a₁ + Σ a_k ζ_k(0))`.
    pub fn lambda(&self, t: f64) -> [f64; 3] {
        let mut s = self.jordan.a1(t);
        for m in &self.modes {
            let z0 = m.profile_at_zero();
            let a = m.eval(t);
            for i in 0..3 {
                s[i] += z0 * a[i];
            }
        }
        s.map(|x| -SQRT_2PI * x)
    }

    /// `ζ(φ, t)`.
    pub fn zeta(&self, phi: f64, t: f64) -> f64 {
        let mut s = self.jordan.a0(t)[0] * zeta0(phi) + self.jordan.a1(t)[0] * zeta1(phi);
        for m in &self.modes {
            s += m.eval(t)[0] * m.profile(phi);
        }
        s
    }

    /// `v(φ, t) = ζ − ζ(0, t) cos(φ/2)`.
    pub fn v(&self, phi: f64, t: f64) -> f64 {
        let mut s = self.jordan.a0(t)[0] * zeta0(phi);
        for m in &self.modes {
            s += m.eval(t)[0] * (m.profile(phi) - m.profile_at_zero() * zeta1(phi));
        }
        s
    }

    /// Samples `v` and `λ` (with analytic derivatives) on the grid.
    pub fn sample(&self, grid: CylinderGrid) -> Result<LinearizedTrajectory> {
        let phis = grid.phi.nodes();
        let ts = grid.t.nodes();
        let mut terms = Vec::with_capacity(self.modes.len() + 1);
        if self.jordan.c1 != 0.0 || self.jordan.c2 != 0.0 {
            terms.push((
                ts.iter().map(|&t| self.jordan.a0(t)[0]).collect(),
                phis.iter().map(|&p| zeta0(p)).collect(),
            ));
        }
        for m in &self.modes {
            let z0 = m.profile_at_zero();
            terms.push((
                ts.iter().map(|&t| m.eval(t)[0]).collect(),
                phis.iter().map(|&p| m.profile(p) - z0 * zeta1(p)).collect::<Vec<f64>>(),
            ));
        }
        let v = CylinderField::from_separable(grid, &terms)?;
        let lambda = TimeSeries::analytic(grid.t, |t| self.lambda(t));
        let mut traj = LinearizedTrajectory::new(v, lambda)?;
        traj.modal = Some(self.clone());
        Ok(traj)
    }
}

/// `(v, λ)` on a cylinder grid, with `ζ = v − λ isq_φ` derived.
#[derive(Debug, Clone)]
pub struct LinearizedTrajectory {
    v: CylinderField,
    lambda: TimeSeries,
    zeta: CylinderField,
    modal: Option<ModalSolution>,
}

impl LinearizedTrajectory {
    /// Checks the Dirichlet traces and oddness of `v` to [`BOUNDARY_TOL`] (relative to `max|v|`, floor 1).
    pub fn new(v: CylinderField, lambda: TimeSeries) -> Result<Self> {
        if lambda.grid != v.grid().t {
            return Err(Error::GridMismatch);
        }
        let g = v.grid().phi;
        if g.lo() != 0.0 || (g.hi() - 2.0 * PI).abs() > 1e-14 {
            return Err(Error::InvalidGrid("v must live on φ ∈ [0, 2π]".into()));
        }
        let scale = v.max_abs().max(1.0);
        let np = v.n_phi();
        for j in 0..v.n_t() {
            let row = v.row(j);
            if row[0].abs() > BOUNDARY_TOL * scale || row[np - 1].abs() > BOUNDARY_TOL * scale {
                return Err(Error::Domain(format!("Dirichlet trace of v violated at t-node {j}")));
            }
            for i in 0..np / 2 {
                if (row[i] + row[np - 1 - i]).abs() > BOUNDARY_TOL * scale {
                    return Err(Error::Parity(format!("v is not odd at t-node {j}")));
                }
            }
        }
        let t0 = v.grid().t.lo();
        let h = v.grid().t.h();
        let zeta = v.map(|p, t, x| {
            let j = ((t - t0) / h).round() as usize;
            x - lambda.value[j] * isq_phi(p)
        });
        Ok(Self { v, lambda, zeta, modal: None })
    }

    /// From samples of `v` and `λ`; time derivatives of `λ` by finite differences.
    pub fn from_samples(v: CylinderField, lambda: Vec<f64>) -> Result<Self> {
        let ts = TimeSeries::sampled(v.grid().t, lambda)?;
        Self::new(v, ts)
    }

    pub fn grid(&self) -> &CylinderGrid {
        self.v.grid()
    }

    pub fn v(&self) -> &CylinderField {
        &self.v
    }

    pub fn lambda(&self) -> &TimeSeries {
        &self.lambda
    }

    pub fn zeta(&self) -> &CylinderField {
        &self.zeta
    }

    /// Modal data, present for synthesized trajectories.
    pub fn modal(&self) -> Option<&ModalSolution> {
        self.modal.as_ref()
    }

    /// Same `v`, with `λ` replaced.
    pub fn with_lambda(&self, lambda: TimeSeries) -> Result<Self> {
        Self::new(self.v.clone(), lambda)
    }

    fn t_range_check(&self, sigma: f64) -> Result<()> {
        let g = self.grid().t;
        if !(sigma >= g.lo() && sigma <= g.hi()) {
            return Err(Error::Domain(format!("σ = {sigma} outside [{}, {}]", g.lo(), g.hi())));
        }
        Ok(())
    }
}

/// Residuals of the three equations, evaluated by finite differences.
#[derive(Debug, Clone)]
pub struct LineareResidual {
    pub pde: CylinderField,
    /// `max(|v(0,t)|, |v(2π,t)|)`.
    pub bc: Vec<f64>,
    /// `λ̇ − λ̈ − 2√(2/π) v_φ(0,t)`.
    pub ode: Vec<f64>,
}

/// Max-norms of a residual triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub pde: f64,
    pub bc: f64,
    pub ode: f64,
}

impl ResidualNorms {
    pub fn max(&self) -> f64 {
        self.pde.max(self.bc).max(self.ode)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl LineareResidual {
    pub fn norms(&self) -> ResidualNorms {
        ResidualNorms { pde: self.pde.max_abs(), bc: max_abs(&self.bc), ode: max_abs(&self.ode) }
    }
}

fn check_fd_grid(g: &CylinderGrid) -> Result<()> {
    if g.phi.n() < 16 || g.t.n() < 16 {
        return Err(Error::GridTooSmall(g.phi.n().min(g.t.n())));
    }
    Ok(())
}

/// `v_φ(0, t)` with the one-sided stencil, for every t-node.
fn trace_derivative(f: &CylinderField, accuracy: usize) -> Result<Vec<f64>> {
    let st = FdStencil::new(f.n_phi(), 1, accuracy)?;
    let h = f.grid().phi.h();
    Ok((0..f.n_t()).map(|j| st.at(f.row(j), 0, h)).collect())
}

pub fn lineare_residual(traj: &LinearizedTrajectory) -> Result<LineareResidual> {
    lineare_residual_with(traj, RESIDUAL_FD_ACCURACY)
}

/// As [`lineare_residual`] with stencils of the given accuracy.
pub fn lineare_residual_with(traj: &LinearizedTrajectory, accuracy: usize) -> Result<LineareResidual> {
    let g = *traj.grid();
    check_fd_grid(&g)?;
    let v = &traj.v;
    let vt = v.d_t_with(1, accuracy)?;
    let vtt = v.d_t_with(2, accuracy)?;
    let vpp = v.d_phi_with(2, accuracy)?;
    let lam = &traj.lambda;
    let np = v.n_phi();
    let phis = g.phi.nodes();
    let mut pde = Vec::with_capacity(g.len());
    for j in 0..v.n_t() {
        let forcing = lam.dot[j] - lam.ddot[j];
        for i in 0..np {
            let idx = j * np + i;
            pde.push(
                vt.values()[idx] - vtt.values()[idx] - 0.25 * v.values()[idx] - vpp.values()[idx]
                    - forcing * isq_phi(phis[i]),
            );
        }
    }
    let bc = (0..v.n_t()).map(|j| v.at(0, j).abs().max(v.at(np - 1, j).abs())).collect();
    let vphi0 = trace_derivative(v, accuracy)?;
    let k = 2.0 * (2.0 / PI).sqrt();
    let ode = (0..v.n_t()).map(|j| lam.dot[j] - lam.ddot[j] - k * vphi0[j]).collect();
    Ok(LineareResidual { pde: CylinderField::new(g, pde)?, bc, ode })
}

/// Residuals of the Ventsel form in `ζ`.
#[derive(Debug, Clone)]
pub struct VentselResidual {
    /// `ζ_tt + ζ_φφ + ζ/4 − ζ_t`.
    pub pde: CylinderField,
    /// `ζ_φ(0,t) + (π/2)(ζ(0,t)/4 + ζ_φφ(0,t))`.
    pub ventsel: Vec<f64>,
    /// `ζ(0,t) + λ(t)/√(2π)`.
    pub trace: Vec<f64>,
}

impl VentselResidual {
    pub fn norms(&self) -> ResidualNorms {
        ResidualNorms { pde: self.pde.max_abs(), bc: max_abs(&self.trace), ode: max_abs(&self.ventsel) }
    }
}

pub fn ventsel_residual(traj: &LinearizedTrajectory) -> Result<VentselResidual> {
    ventsel_residual_with(traj, RESIDUAL_FD_ACCURACY)
}

pub fn ventsel_residual_with(traj: &LinearizedTrajectory, accuracy: usize) -> Result<VentselResidual> {
    let g = *traj.grid();
    check_fd_grid(&g)?;
    let z = &traj.zeta;
    let zt = z.d_t_with(1, accuracy)?;
    let ztt = z.d_t_with(2, accuracy)?;
    let zpp = z.d_phi_with(2, accuracy)?;
    let pde: Vec<f64> = (0..g.len())
        .map(|i| ztt.values()[i] + zpp.values()[i] + 0.25 * z.values()[i] - zt.values()[i])
        .collect();
    let zp0 = trace_derivative(z, accuracy)?;
    let ventsel = (0..z.n_t()).map(|j| zp0[j] + 0.5 * PI * (0.25 * z.at(0, j) + zpp.at(0, j))).collect();
    let trace = (0..z.n_t()).map(|j| z.at(0, j) + traj.lambda.value[j] / SQRT_2PI).collect();
    Ok(VentselResidual { pde: CylinderField::new(g, pde)?, ventsel, trace })
}

/// Pure Jordan-pair trajectory: `v = a₀ζ₀`, `λ = −√(2π)c₁t + √(2π)c₂teᵗ + d(eᵗ − 1)`.
pub fn slow_mode_solution(c1: f64, c2: f64, d: f64) -> ModalSolution {
    ModalSolution {
        jordan: JordanPart { c1, c2, b1: d / SQRT_2PI, b2: -d / SQRT_2PI },
        modes: Vec::new(),
    }
}

pub fn slow_mode(c1: f64, c2: f64, d: f64, grid: CylinderGrid) -> Result<LinearizedTrajectory> {
    slow_mode_solution(c1, c2, d).sample(grid)
}

/// The printed integral condition at `σ`:
/// `∫[(v/2 − v_t)(cos(3φ/2) + cos(φ/2)) + v_φ(sin(3φ/2) + sin(φ/2))]dφ + √(π/2) λ̇(σ)`.
pub fn extra_condition(traj: &LinearizedTrajectory, sigma: f64) -> Result<f64> {
    traj.t_range_check(sigma)?;
    let g = *traj.grid();
    let v = traj.v.section_at(sigma).expect("σ checked");
    let vt = traj.v.d_t(1)?.section_at(sigma).expect("σ checked");
    let vp = traj.v.d_phi(1)?.section_at(sigma).expect("σ checked");
    let lam_dot = traj.lambda.at(sigma).expect("σ checked")[1];
    let integrand: Vec<f64> = g
        .phi
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            (0.5 * v[i] - vt[i]) * ((1.5 * p).cos() + (0.5 * p).cos())
                + vp[i] * ((1.5 * p).sin() + (0.5 * p).sin())
        })
        .collect();
    Ok(integrate_values(&integrand, g.phi.h()) + (PI / 2.0).sqrt() * lam_dot)
}

/// `∫ sin(φ/2) v_φ(φ, σ) dφ`: the first variation of the singleton identity
/// about `(isq, 0)` with the crack at angle 0. It vanishes on every Ventsel
/// mode and equals `π/2` on `slow_mode(1, 0, 0)`.
pub fn am_linearized_condition(traj: &LinearizedTrajectory, sigma: f64) -> Result<f64> {
    traj.t_range_check(sigma)?;
    let g = *traj.grid();
    let vp = traj.v.d_phi(1)?.section_at(sigma).expect("σ checked");
    let integrand: Vec<f64> = g.phi.nodes().iter().zip(&vp).map(|(p, d)| (0.5 * p).sin() * d).collect();
    Ok(integrate_values(&integrand, g.phi.h()))
}

/// One `(k, C, D)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub k: usize,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub d: f64,
}

/// Modal solution from mode triples and a Jordan part.
pub fn modal_solution(sp: &VentselSpectrum, modes: &[ModeSpec], jordan: JordanPart) -> Result<ModalSolution> {
    let modes = modes
        .iter()
        .map(|m| coefficient_solution(sp, m.k, m.c, m.d))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModalSolution { jordan, modes })
}

/// `ζ = ā₁cos(φ/2) + Σ C_k e^{(½−ν_k)t} ζ_k` with `ā₁ = −λ_∞/√(2π)`, so `λ → λ_∞`.
pub fn synthesize_decaying_solution(sp: &VentselSpectrum, coeffs: &[(usize, f64)], lambda_inf: f64) -> Result<ModalSolution> {
    let specs: Vec<ModeSpec> = coeffs.iter().map(|&(k, c)| ModeSpec { k, c, d: 0.0 }).collect();
    modal_solution(sp, &specs, JordanPart { b1: -lambda_inf / SQRT_2PI, ..JordanPart::default() })
}

pub fn synthesize_decaying(
    sp: &VentselSpectrum,
    coeffs: &[(usize, f64)],
    lambda_inf: f64,
    grid: CylinderGrid,
) -> Result<LinearizedTrajectory> {
    synthesize_decaying_solution(sp, coeffs, lambda_inf)?.sample(grid)
}

/// Random solution with `a₀ ≡ 0`, drawn in one of three regimes with equal
/// probability: decaying modes only, growing modes only, or both with
/// magnitudes spread over `[10⁻⁶, 1]` so the crossover lands at random times.
/// A random rotation part `b₁ + b₂eᵗ` is always added.
pub fn random_genuine_solution<R: rand::Rng>(sp: &VentselSpectrum, rng: &mut R, k_max: usize) -> Result<ModalSolution> {
    let regime = rng.gen_range(0..3u8);
    let coef = |rng: &mut R, lo: f64| {
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        sign * 10f64.powf(rng.gen_range(lo..0.0))
    };
    let modes: Vec<ModeSpec> = (2..=k_max)
        .map(|k| match regime {
            0 => ModeSpec { k, c: coef(rng, -3.0), d: 0.0 },
            1 => ModeSpec { k, c: 0.0, d: coef(rng, -3.0) },
            _ => ModeSpec { k, c: coef(rng, -3.0), d: coef(rng, -6.0) },
        })
        .collect();
    let jordan = JordanPart { b1: rng.gen_range(-1.0..1.0), b2: rng.gen_range(-1.0..1.0), ..JordanPart::default() };
    modal_solution(sp, &modes, jordan)
}

/// Per-node decay measure `‖v(·,t)‖_{H²} + |λ̇| + |λ̈|`.
pub fn decay_measure(traj: &LinearizedTrajectory) -> Result<Vec<f64>> {
    let g = *traj.grid();
    let w = simpson_weights(g.phi.n(), g.phi.h());
    let v = &traj.v;
    let vp = v.d_phi(1)?;
    let vpp = v.d_phi(2)?;
    Ok((0..v.n_t())
        .map(|j| {
            let s: f64 = (0..v.n_phi())
                .map(|i| w[i] * (v.at(i, j).powi(2) + vp.at(i, j).powi(2) + vpp.at(i, j).powi(2)))
                .sum();
            s.sqrt() + traj.lambda.dot[j].abs() + traj.lambda.ddot[j].abs()
        })
        .collect())
}

/// Least-squares slope of `log(decay_measure)` over `window = (t_a, t_b)`.
pub fn decay_rate(traj: &LinearizedTrajectory, window: (f64, f64)) -> Result<f64> {
    let g = traj.grid().t;
    let (a, b) = window;
    if !(a < b) || a < g.lo() - 1e-12 || b > g.hi() + 1e-12 {
        return Err(Error::Domain(format!("window [{a}, {b}] outside the trajectory range")));
    }
    let m = decay_measure(traj)?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (j, &val) in m.iter().enumerate() {
        let t = g.node(j);
        if t >= a - 1e-12 && t <= b + 1e-12 {
            if !(val > 1e-300) {
                return Err(Error::Numerical(format!("trajectory numerically zero at t = {t}")));
            }
            xs.push(t);
            ys.push(val.ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::Domain("window holds fewer than two grid nodes".into()));
    }
    Ok(linear_fit(&xs, &ys)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum() -> VentselSpectrum {
        VentselSpectrum::on_grid(513, 10).unwrap()
    }

    fn small_grid() -> CylinderGrid {
        CylinderGrid::log_polar(257, 0.0, 3.0, 201).unwrap()
    }

    #[test]
    fn sqrt_2pi_constant() {
        assert!((SQRT_2PI - (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn coefficient_ode_and_exponents() {
        let sp = spectrum();
        for k in [2, 3] {
            let m = coefficient_solution(&sp, k, 0.7, -0.3).unwrap();
            for t in [0.0, 0.5, 1.7] {
                assert!(m.ode_residual(t).abs() < 1e-10 * (1.0 + m.eval(t)[2].abs()));
            }
            let (p, q) = (0.5 + m.nu, 0.5 - m.nu);
            for x in [p, q] {
                assert!((x * x - x - (m.nu * m.nu - 0.25)).abs() < 1e-12);
            }
        }
        let m = coefficient_solution(&sp, 2, 1.0, 0.0).unwrap();
        assert!(m.mu() > 1.0);
        assert!(m.eval(1.0)[0] / m.eval(0.0)[0] < (-1.0f64).exp());
        assert!(coefficient_solution(&sp, 1, 1.0, 0.0).is_err());
    }

    #[test]
    fn jordan_derivatives_match_fd() {
        let j = JordanPart { c1: 0.4, c2: -0.2, b1: 0.1, b2: 0.3 };
        let h = 1e-4;
        for t in [0.0, 1.0, 2.5] {
            for f in [JordanPart::a0, JordanPart::a1] {
                let [_, d, dd] = f(&j, t);
                let fd1 = (f(&j, t + h)[0] - f(&j, t - h)[0]) / (2.0 * h);
                let fd2 = (f(&j, t + h)[0] - 2.0 * f(&j, t)[0] + f(&j, t - h)[0]) / (h * h);
                assert!((d - fd1).abs() < 1e-6 && (dd - fd2).abs() < 1e-4);
            }
            // a₁'' − a₁' = −a₀
            let a0 = j.a0(t)[0];
            let [_, d1, dd1] = j.a1(t);
            assert!((dd1 - d1 + a0).abs() < 1e-12);
        }
    }

    #[test]
    fn slow_mode_lambda_closed_form() {
        let s = slow_mode_solution(1.0, 0.0, 0.0);
        for t in [0.0, 1.0, 3.0] {
            let [l, ld, ldd] = s.lambda(t);
            assert!((l + SQRT_2PI * t).abs() < 1e-14);
            assert!((ld + SQRT_2PI).abs() < 1e-14 && ldd.abs() < 1e-14);
        }
        let s = slow_mode_solution(0.3, -0.2, 0.5);
        assert!(s.lambda(0.0)[0].abs() < 1e-15);
        // λ̇ − λ̈ = −√(2π) a₀ from the third equation with v_φ(0) = −(π/2) a₀
        for t in [0.0, 0.8, 2.0] {
            let [_, ld, ldd] = s.lambda(t);
            assert!((ld - ldd + SQRT_2PI * s.jordan.a0(t)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_trajectory_has_zero_residuals() {
        let traj = slow_mode(0.0, 0.0, 0.0, small_grid()).unwrap();
        assert_eq!(traj.v().max_abs(), 0.0);
        let n = lineare_residual(&traj).unwrap().norms();
        assert_eq!(n.max(), 0.0);
        assert_eq!(extra_condition(&traj, 1.0).unwrap(), 0.0);
        assert_eq!(ventsel_residual(&traj).unwrap().norms().max(), 0.0);
    }

    #[test]
    fn constant_lambda_is_a_solution() {
        let g = small_grid();
        let lam = TimeSeries::analytic(g.t, |_| [0.8, 0.0, 0.0]);
        let traj = LinearizedTrajectory::new(CylinderField::zeros(g), lam).unwrap();
        assert_eq!(lineare_residual(&traj).unwrap().norms().max(), 0.0);
    }

    #[test]
    fn single_mode_residuals_small() {
        let sp = spectrum();
        let traj = synthesize_decaying(&sp, &[(3, 1.0)], 0.0, small_grid()).unwrap();
        let n = lineare_residual(&traj).unwrap().norms();
        assert!(n.max() < 1e-4, "{n:?}");
        let vn = ventsel_residual(&traj).unwrap().norms();
        assert!(vn.max() < 1e-4, "{vn:?}");
    }

    #[test]
    fn rejects_non_odd_or_nonzero_trace() {
        let g = small_grid();
        let v = CylinderField::from_fn(g, |p, _| (0.5 * p).sin());
        assert!(LinearizedTrajectory::new(v, TimeSeries::zeros(g.t)).is_err());
        let v = CylinderField::from_fn(g, |p, _| (p - PI).powi(2) * 0.0 + (p - PI));
        assert!(LinearizedTrajectory::new(v, TimeSeries::zeros(g.t)).is_err());
    }

    #[test]
    fn extra_condition_range_check() {
        let traj = slow_mode(1.0, 0.0, 0.0, small_grid()).unwrap();
        assert!(extra_condition(&traj, 5.0).is_err());
    }

    #[test]
    fn decay_of_slow_mode_is_not_negative() {
        let traj = slow_mode(1.0, 0.0, 0.0, small_grid()).unwrap();
        assert!(decay_rate(&traj, (0.5, 2.5)).unwrap() >= -1e-9);
        let zero = slow_mode(0.0, 0.0, 0.0, small_grid()).unwrap();
        assert!(decay_rate(&zero, (0.5, 2.5)).is_err());
    }
}
