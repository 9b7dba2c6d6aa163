//! The odd-parity eigenvalue problem with the Ventsel boundary condition.
//!
//! Eigenvalues are `ν_k = x_k/π` with `x_k` the positive zeros of
//! `Ψ(x) = 8x cos x − (π² − 4x²) sin x`. The eigenfunctions are
//! `ζ_k = c_k sin(ν_k(φ − π))` for `k ≥ 2`, plus the pair
//! `ζ₁ = cos(φ/2)`, `ζ₀ = (φ − π) sin(φ/2)` spanning the Jordan block.
//! The indefinite form is `⟨u, v⟩ = ∫ u′v′ − ¼∫ uv` over `[0, 2π]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{
    bisect, cumulative_integral, simpson_weights, FdStencil, Grid1D, Parity, RootBracket, SampledFunction1D,
};

/// Default number of eigenvalues computed.
pub const DEFAULT_K: usize = 64;

/// Default φ-grid size for one-dimensional spectral work.
pub const DEFAULT_N: usize = 2049;

/// Bisection tolerance on `x = πν`.
pub const BISECTION_TOL: f64 = 1e-13;

/// Accuracy order of the derivative stencils used inside the bilinear form.
pub const FORM_FD_ACCURACY: usize = 4;

/// `Ψ(x) = 8x cos x − (π² − 4x²) sin x`.
pub fn psi(x: f64) -> f64 {
    8.0 * x * x.cos() - (PI * PI - 4.0 * x * x) * x.sin()
}

pub fn psi_prime(x: f64) -> f64 {
    (8.0 - PI * PI + 4.0 * x * x) * x.cos()
}

/// `Φ(x) = eˣ(π² + x² − 4x) − π² − x² − 4x`.
pub fn phi_positive(x: f64) -> f64 {
    x.exp() * (PI * PI + x * x - 4.0 * x) - PI * PI - x * x - 4.0 * x
}

pub fn phi_positive_prime(x: f64) -> f64 {
    x.exp() * (PI * PI + x * x - 2.0 * x - 4.0) - 2.0 * x - 4.0
}

/// Bracket on `x = πν` that holds the `k`-th eigenvalue, `k ≥ 2`.
pub fn eigen_bracket(k: usize) -> Result<RootBracket> {
    match k {
        0 | 1 => Err(Error::Domain(format!("no bracket for k = {k}; ν₁ = ½ is exact"))),
        2 => RootBracket::new(1.5 * PI, 2.0 * PI),
        _ => RootBracket::new((k - 1) as f64 * PI, k as f64 * PI),
    }
}

/// `ν_k` with the final bisection bracket (in `x = πν`), `k ≥ 1`.
pub fn eigenvalue_nu(k: usize) -> Result<(f64, Option<RootBracket>)> {
    if k == 0 {
        return Err(Error::Domain("ζ₀ is a generalized mode without eigenvalue".into()));
    }
    if k == 1 {
        return Ok((0.5, None));
    }
    let br = eigen_bracket(k)?;
    let (x, fin) = bisect(psi, br, BISECTION_TOL)
        .map_err(|e| Error::Numerical(format!("eigenvalue {k}: {e}")))?;
    Ok((x / PI, Some(fin)))
}

/// Derivative stencils and quadrature weights for the form `⟨·,·⟩` on one grid.
#[derive(Debug, Clone)]
pub struct BilinearFormContext {
    grid: Grid1D,
    fd_accuracy: usize,
    weights: Vec<f64>,
    d1: FdStencil,
    d2: FdStencil,
    d3: FdStencil,
}

impl BilinearFormContext {
    pub fn new(grid: Grid1D) -> Result<Self> {
        Self::with_accuracy(grid, FORM_FD_ACCURACY)
    }

    pub fn with_accuracy(grid: Grid1D, fd_accuracy: usize) -> Result<Self> {
        let tp = 2.0 * PI;
        if grid.lo() != 0.0 || (grid.hi() - tp).abs() > 1e-14 {
            return Err(Error::InvalidGrid("bilinear form lives on [0, 2π]".into()));
        }
        if grid.mid_index().is_none() {
            return Err(Error::InvalidGrid("need an odd node count so that φ = π is a node".into()));
        }
        Ok(Self {
            grid,
            fd_accuracy,
            weights: simpson_weights(grid.n(), grid.h()),
            d1: FdStencil::new(grid.n(), 1, fd_accuracy)?,
            d2: FdStencil::new(grid.n(), 2, fd_accuracy)?,
            d3: FdStencil::new(grid.n(), 3, fd_accuracy)?,
        })
    }

    pub fn default_grid() -> Result<Self> {
        Self::new(Grid1D::angular(DEFAULT_N)?)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn fd_accuracy(&self) -> usize {
        self.fd_accuracy
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check(&self, u: &SampledFunction1D) -> Result<()> {
        if u.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Derivative of order 1, 2 or 3 with this context's stencils.
    pub fn derivative(&self, u: &SampledFunction1D, order: usize) -> Result<SampledFunction1D> {
        self.check(u)?;
        let st = match order {
            1 => &self.d1,
            2 => &self.d2,
            3 => &self.d3,
            _ => return Err(Error::DerivativeOrder(order)),
        };
        let vals = st.apply(u.values(), self.grid.h());
        Ok(SampledFunction1D::new_unchecked(self.grid, vals, u.parity().differentiated(order)))
    }

    pub fn integral(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
    }

    /// `⟨u, v⟩ = ∫ u′v′ − ¼∫ uv`.
    pub fn bilinear(&self, u: &SampledFunction1D, v: &SampledFunction1D) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let du = self.d1.apply(u.values(), self.grid.h());
        let dv = self.d1.apply(v.values(), self.grid.h());
        Ok(self.form_from_parts(u.values(), &du, v.values(), &dv))
    }

    /// The form from precomputed values and first derivatives.
    pub fn form_from_parts(&self, u: &[f64], du: &[f64], v: &[f64], dv: &[f64]) -> f64 {
        self.dot(du, dv) - 0.25 * self.dot(u, v)
    }

    /// `L²` inner product.
    pub fn l2(&self, u: &SampledFunction1D, v: &SampledFunction1D) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.dot(u.values(), v.values()))
    }

    /// Discrete `H^m` norm, `m ≤ 3`.
    pub fn sobolev_norm(&self, u: &SampledFunction1D, m: usize) -> Result<f64> {
        self.check(u)?;
        let mut s = self.dot(u.values(), u.values());
        for order in 1..=m {
            let d = self.derivative(u, order)?;
            s += self.dot(d.values(), d.values());
        }
        Ok(s.sqrt())
    }

    pub fn h1_norm(&self, u: &SampledFunction1D) -> Result<f64> {
        self.sobolev_norm(u, 1)
    }

    pub fn sample(&self, parity: Parity, f: impl Fn(f64) -> f64) -> Result<SampledFunction1D> {
        SampledFunction1D::from_fn(self.grid, parity, f)
    }
}

/// One entry of the spectrum.
#[derive(Debug, Clone)]
pub struct VentselMode {
    pub k: usize,
    /// `None` for the generalized mode `k = 0`.
    pub nu: Option<f64>,
    /// `ν_k − ½`, only for `k ≥ 2`.
    pub mu: Option<f64>,
    /// Normalization `c_k > 0`, only for `k ≥ 2`.
    pub c: Option<f64>,
    /// Final bisection bracket on `x = πν`.
    pub bracket: Option<RootBracket>,
    /// `Ψ(πν_k)`.
    pub psi_residual: Option<f64>,
    pub profile: SampledFunction1D,
}

/// Unnormalized profile `sin(ν(φ − π))`.
fn raw_sine(ctx: &BilinearFormContext, nu: f64) -> SampledFunction1D {
    let g = *ctx.grid();
    let vals = g.nodes().iter().map(|p| (nu * (p - PI)).sin()).collect();
    SampledFunction1D::new_unchecked(g, vals, Parity::Odd)
}

/// `ζ₀ = (φ − π) sin(φ/2)`.
pub fn zeta0(phi: f64) -> f64 {
    (phi - PI) * (0.5 * phi).sin()
}

/// `ζ₁ = cos(φ/2)`.
pub fn zeta1(phi: f64) -> f64 {
    (0.5 * phi).cos()
}

/// Mode `k` on the context grid; `k ≥ 2` profiles are normalized in the discrete form.
pub fn eigenvalue(k: usize, ctx: &BilinearFormContext) -> Result<VentselMode> {
    let g = *ctx.grid();
    match k {
        0 => Ok(VentselMode {
            k,
            nu: None,
            mu: None,
            c: None,
            bracket: None,
            psi_residual: None,
            profile: SampledFunction1D::new_unchecked(g, g.nodes().into_iter().map(zeta0).collect(), Parity::Odd),
        }),
        1 => Ok(VentselMode {
            k,
            nu: Some(0.5),
            mu: None,
            c: None,
            bracket: None,
            psi_residual: Some(psi(0.5 * PI)),
            profile: SampledFunction1D::new_unchecked(g, g.nodes().into_iter().map(zeta1).collect(), Parity::Odd),
        }),
        _ => {
            let (nu, bracket) = eigenvalue_nu(k)?;
            let raw = raw_sine(ctx, nu);
            let q = ctx.bilinear(&raw, &raw)?;
            if !(q > 0.0) {
                return Err(Error::Numerical(format!("⟨ζ_{k}, ζ_{k}⟩ = {q} is not positive")));
            }
            let c = 1.0 / q.sqrt();
            Ok(VentselMode {
                k,
                nu: Some(nu),
                mu: Some(nu - 0.5),
                c: Some(c),
                bracket,
                psi_residual: Some(psi(PI * nu)),
                profile: raw.scale(c),
            })
        }
    }
}

/// Sampled basis function `ζ_k`.
pub fn basis_function(k: usize, ctx: &BilinearFormContext) -> Result<SampledFunction1D> {
    Ok(eigenvalue(k, ctx)?.profile)
}

/// Closed-form `⟨sin(ν(·−π)), sin(ν(·−π))⟩`, used as an oracle for `c_k`.
pub fn sine_form_exact(nu: f64) -> f64 {
    let s = (2.0 * PI * nu).sin() / (2.0 * nu);
    nu * nu * (PI + s) - 0.25 * (PI - s)
}

/// `𝒜(g)`: the odd solution of `h″ = g` with the Ventsel boundary condition.
///
/// `h = s(φ − π) + G` with `G(φ) = ∫_π^φ ∫_π^τ g` and
/// `s(π²/8 − 1) = G′(0) + (π/2)(G(0)/4 + g(0))`.
pub fn resolvent(g: &SampledFunction1D, ctx: &BilinearFormContext) -> Result<SampledFunction1D> {
    if g.grid() != ctx.grid() {
        return Err(Error::GridMismatch);
    }
    if g.parity() != Parity::Odd {
        g.clone().with_parity(Parity::Odd)?;
    }
    let grid = *ctx.grid();
    let mid = grid.mid_index().expect("context grid has a midpoint");
    let h = grid.h();
    let g1 = cumulative_integral(g.values(), h, mid);
    let gg = cumulative_integral(&g1, h, mid);
    let s = (g1[0] + 0.5 * PI * (0.25 * gg[0] + g.first())) / (PI * PI / 8.0 - 1.0);
    let vals = gg.iter().enumerate().map(|(i, v)| s * (grid.node(i) - PI) + v).collect();
    Ok(SampledFunction1D::new_unchecked(grid, vals, Parity::Odd))
}

/// Ventsel boundary residual `u′(0) + (π/2)(u(0)/4 + u″(0))`.
pub fn ventsel_boundary_residual(u: &SampledFunction1D, ctx: &BilinearFormContext) -> Result<f64> {
    let d1 = ctx.derivative(u, 1)?;
    let d2 = ctx.derivative(u, 2)?;
    Ok(d1.first() + 0.5 * PI * (0.25 * u.first() + d2.first()))
}

/// Modes `0..=k_max` on one grid, with cached first derivatives for fast projections.
#[derive(Debug, Clone)]
pub struct VentselSpectrum {
    ctx: BilinearFormContext,
    modes: Vec<VentselMode>,
    derivs: Vec<Vec<f64>>,
    zeta0_norm: f64,
}

impl VentselSpectrum {
    pub fn new(ctx: BilinearFormContext, k_max: usize) -> Result<Self> {
        if k_max < 2 {
            return Err(Error::Domain(format!("k_max = {k_max}, need at least 2")));
        }
        let modes = (0..=k_max).map(|k| eigenvalue(k, &ctx)).collect::<Result<Vec<_>>>()?;
        let derivs = modes
            .iter()
            .map(|m| Ok(ctx.derivative(&m.profile, 1)?.into_values()))
            .collect::<Result<Vec<_>>>()?;
        let zeta0_norm = ctx.form_from_parts(modes[0].profile.values(), &derivs[0], modes[0].profile.values(), &derivs[0]);
        Ok(Self { ctx, modes, derivs, zeta0_norm })
    }

    pub fn on_grid(n: usize, k_max: usize) -> Result<Self> {
        Self::new(BilinearFormContext::new(Grid1D::angular(n)?)?, k_max)
    }

    pub fn context(&self) -> &BilinearFormContext {
        &self.ctx
    }

    pub fn grid(&self) -> &Grid1D {
        self.ctx.grid()
    }

    pub fn k_max(&self) -> usize {
        self.modes.len() - 1
    }

    pub fn mode(&self, k: usize) -> &VentselMode {
        &self.modes[k]
    }

    pub fn modes(&self) -> &[VentselMode] {
        &self.modes
    }

    /// `ν_k` for `k ≥ 1`.
    pub fn nu(&self, k: usize) -> f64 {
        self.modes[k].nu.expect("k ≥ 1")
    }

    /// `c_k` for `k ≥ 2`.
    pub fn c(&self, k: usize) -> f64 {
        self.modes[k].c.expect("k ≥ 2")
    }

    /// `ζ_k(0) = −c_k sin(ν_k π)` for `k ≥ 2`, `ζ₁(0) = 1`, `ζ₀(0) = 0`.
    pub fn value_at_zero(&self, k: usize) -> f64 {
        match k {
            0 => 0.0,
            1 => 1.0,
            _ => -self.c(k) * (self.nu(k) * PI).sin(),
        }
    }

    /// Discrete `⟨ζ₀, ζ₀⟩` (analytically π).
    pub fn zeta0_norm(&self) -> f64 {
        self.zeta0_norm
    }

    /// Sampled `ζ_k′`.
    pub fn mode_derivative(&self, k: usize) -> &[f64] {
        &self.derivs[k]
    }

    /// `⟨u, ζ_k⟩` with `u′` supplied.
    pub fn form_with_mode(&self, u: &[f64], du: &[f64], k: usize) -> f64 {
        self.ctx.form_from_parts(u, du, self.modes[k].profile.values(), &self.derivs[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_anchors() {
        assert_eq!(psi(0.0), 0.0);
        assert!(psi(0.5 * PI).abs() < 1e-14);
        assert!((psi(PI) + 8.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn psi_prime_matches_difference_quotient() {
        for &x in &[0.3, 1.7, 4.0, 9.5] {
            let h = 1e-6;
            let fd = (psi(x + h) - psi(x - h)) / (2.0 * h);
            assert!((fd - psi_prime(x)).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn phi_anchors() {
        assert_eq!(phi_positive(0.0), 0.0);
        assert!((phi_positive_prime(0.0) - (PI * PI - 8.0)).abs() < 1e-14);
        assert!(phi_positive(1.0) > 0.0);
    }

    #[test]
    fn low_eigenvalues() {
        assert_eq!(eigenvalue_nu(1).unwrap().0, 0.5);
        let (nu2, br) = eigenvalue_nu(2).unwrap();
        assert!(nu2 > 1.5 && nu2 < 2.0);
        assert!(br.unwrap().width() <= BISECTION_TOL);
        // independent high-precision value
        assert!((nu2 - 1.889_350_969_048_749_6).abs() < 1e-12);
        assert!(nu2 - 0.5 > 1.0);
        assert!(eigenvalue_nu(0).is_err());
    }

    #[test]
    fn normalization_matches_closed_form() {
        let ctx = BilinearFormContext::default_grid().unwrap();
        for k in 2..=6 {
            let m = eigenvalue(k, &ctx).unwrap();
            let exact = 1.0 / sine_form_exact(m.nu.unwrap()).sqrt();
            assert!((m.c.unwrap() - exact).abs() < 1e-8 * exact, "k {k}");
        }
        let c2 = eigenvalue(2, &ctx).unwrap().c.unwrap();
        assert!((c2 - 0.31974).abs() < 1e-5);
    }

    #[test]
    fn zeta0_form_is_pi() {
        let sp = VentselSpectrum::on_grid(1025, 4).unwrap();
        assert!((sp.zeta0_norm() - PI).abs() < 1e-9);
    }

    #[test]
    fn resolvent_on_zeta1() {
        let ctx = BilinearFormContext::default_grid().unwrap();
        let z1 = basis_function(1, &ctx).unwrap();
        let h = resolvent(&z1, &ctx).unwrap();
        let d = h.combine(1.0, &z1, 4.0).unwrap();
        assert!(ctx.h1_norm(&d).unwrap() < 1e-8);
    }

    #[test]
    fn resolvent_rejects_even_input() {
        let ctx = BilinearFormContext::new(Grid1D::angular(65).unwrap()).unwrap();
        let g = ctx.sample(Parity::None, |p| (0.5 * p).sin()).unwrap();
        assert!(matches!(resolvent(&g, &ctx), Err(Error::Parity(_))));
    }

    #[test]
    fn context_requires_odd_angular_grid() {
        assert!(BilinearFormContext::new(Grid1D::angular(64).unwrap()).is_err());
        assert!(BilinearFormContext::new(Grid1D::new(0.0, 1.0, 65).unwrap()).is_err());
    }
}
