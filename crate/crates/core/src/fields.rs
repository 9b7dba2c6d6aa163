//! Crack-tip fields, crack parametrizations and the polar / log-polar charts.
//!
//! Fields are evaluated in a polar chart `(φ, r)` whose angle is measured
//! from the crack at radius `r`, with `φ ∈ [0, 2π]`. Gradients are returned
//! in that chart as `(∂_r u, r⁻¹∂_φ u)`. For a straight crack along the
//! positive x-axis the chart angle is the ordinary polar angle.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cylinder::{CylinderField, CylinderGrid};
use crate::error::{Error, Result};
use crate::numerics::GaussRule;

/// Point with `r > 0` and `φ ∈ [0, 2π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    pub phi: f64,
}

impl PolarPoint {
    pub fn new(r: f64, phi: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("radius {r} must be positive")));
        }
        if !(0.0..=2.0 * PI).contains(&phi) {
            return Err(Error::Domain(format!("angle {phi} outside [0, 2π]")));
        }
        Ok(Self { r, phi })
    }
}

/// `(∂_r u, r⁻¹∂_φ u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarGradient {
    pub d_r: f64,
    pub d_phi_over_r: f64,
}

impl PolarGradient {
    pub fn norm_sq(&self) -> f64 {
        self.d_r * self.d_r + self.d_phi_over_r * self.d_phi_over_r
    }

    /// Rotation by +90° in the `(e_r, e_φ)` frame.
    pub fn perp(&self) -> Self {
        Self { d_r: -self.d_phi_over_r, d_phi_over_r: self.d_r }
    }
}

/// A scalar field in the crack-relative polar chart.
pub trait PolarField: Send + Sync {
    fn value(&self, phi: f64, r: f64) -> f64;

    /// Defaults to fourth-order central differences.
    fn gradient(&self, phi: f64, r: f64) -> PolarGradient {
        fd_gradient(self, phi, r)
    }
}

/// Central-difference gradient, stepping inward near the slit.
pub fn fd_gradient<F: PolarField + ?Sized>(f: &F, phi: f64, r: f64) -> PolarGradient {
    let hr = 1e-3 * r;
    let d_r = (-f.value(phi, r + 2.0 * hr) + 8.0 * f.value(phi, r + hr) - 8.0 * f.value(phi, r - hr)
        + f.value(phi, r - 2.0 * hr))
        / (12.0 * hr);
    let hp = 1e-3_f64.min(0.25 * phi.min(2.0 * PI - phi)).max(1e-7);
    let d_phi = (-f.value(phi + 2.0 * hp, r) + 8.0 * f.value(phi + hp, r) - 8.0 * f.value(phi - hp, r)
        + f.value(phi - 2.0 * hp, r))
        / (12.0 * hp);
    PolarGradient { d_r, d_phi_over_r: d_phi / r }
}

/// `Rad = √(2r/π) cos(φ/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rad;

/// `Isq = √(2r/π) sin(φ/2)`, the harmonic conjugate of [`Rad`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Isq;

impl PolarField for Rad {
    fn value(&self, phi: f64, r: f64) -> f64 {
        (2.0 * r / PI).sqrt() * (0.5 * phi).cos()
    }

    fn gradient(&self, phi: f64, r: f64) -> PolarGradient {
        let s = 1.0 / (2.0 * PI * r).sqrt();
        PolarGradient { d_r: s * (0.5 * phi).cos(), d_phi_over_r: -s * (0.5 * phi).sin() }
    }
}

impl PolarField for Isq {
    fn value(&self, phi: f64, r: f64) -> f64 {
        (2.0 * r / PI).sqrt() * (0.5 * phi).sin()
    }

    fn gradient(&self, phi: f64, r: f64) -> PolarGradient {
        let s = 1.0 / (2.0 * PI * r).sqrt();
        PolarGradient { d_r: s * (0.5 * phi).sin(), d_phi_over_r: s * (0.5 * phi).cos() }
    }
}

/// The two model fields, selectable at run time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrackTipField {
    Rad,
    Isq,
}

impl PolarField for CrackTipField {
    fn value(&self, phi: f64, r: f64) -> f64 {
        match self {
            CrackTipField::Rad => Rad.value(phi, r),
            CrackTipField::Isq => Isq.value(phi, r),
        }
    }

    fn gradient(&self, phi: f64, r: f64) -> PolarGradient {
        match self {
            CrackTipField::Rad => Rad.gradient(phi, r),
            CrackTipField::Isq => Isq.gradient(phi, r),
        }
    }
}

pub fn rad(p: PolarPoint) -> f64 {
    Rad.value(p.phi, p.r)
}

pub fn isq(p: PolarPoint) -> f64 {
    Isq.value(p.phi, p.r)
}

pub fn grad_polar(field: CrackTipField, p: PolarPoint) -> PolarGradient {
    field.gradient(p.phi, p.r)
}

/// `φ ↦ isq_φ(φ)` at `r = 1` scaled to unit radius: `cos(φ/2)/√(2π)`.
pub fn isq_phi(phi: f64) -> f64 {
    (0.5 * phi).cos() / (2.0 * PI).sqrt()
}

/// A field given by closures; without an analytic gradient, [`fd_gradient`] is used.
#[derive(Clone)]
pub struct FnField {
    value: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    gradient: Option<Arc<dyn Fn(f64, f64) -> PolarGradient + Send + Sync>>,
}

impl FnField {
    pub fn new(value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { value: Arc::new(value), gradient: None }
    }

    pub fn with_gradient(
        value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(f64, f64) -> PolarGradient + Send + Sync + 'static,
    ) -> Self {
        Self { value: Arc::new(value), gradient: Some(Arc::new(gradient)) }
    }

    pub fn zero() -> Self {
        Self::with_gradient(|_, _| 0.0, |_, _| PolarGradient { d_r: 0.0, d_phi_over_r: 0.0 })
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField").field("analytic_gradient", &self.gradient.is_some()).finish()
    }
}

impl PolarField for FnField {
    fn value(&self, phi: f64, r: f64) -> f64 {
        (self.value)(phi, r)
    }

    fn gradient(&self, phi: f64, r: f64) -> PolarGradient {
        match &self.gradient {
            Some(g) => g(phi, r),
            None => fd_gradient(self, phi, r),
        }
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Crack `S = { r(cos α(r), sin α(r)) : 0 < r < 1 }`.
#[derive(Clone)]
pub struct CrackParametrization {
    alpha: RealFn,
    d1: Option<RealFn>,
    d2: Option<RealFn>,
}

impl fmt::Debug for CrackParametrization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CrackParametrization")
            .field("alpha(1/2)", &self.alpha(0.5))
            .field("analytic_derivatives", &(self.d1.is_some(), self.d2.is_some()))
            .finish()
    }
}

impl CrackParametrization {
    /// Derivatives by finite differences.
    pub fn new(alpha: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { alpha: Arc::new(alpha), d1: None, d2: None }
    }

    pub fn with_derivatives(
        alpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { alpha: Arc::new(alpha), d1: Some(Arc::new(d1)), d2: Some(Arc::new(d2)) }
    }

    /// `α ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self::with_derivatives(move |_| c, |_| 0.0, |_| 0.0)
    }

    /// `α(r) = εr`.
    pub fn linear(eps: f64) -> Self {
        Self::with_derivatives(move |r| eps * r, move |_| eps, |_| 0.0)
    }

    pub fn alpha(&self, r: f64) -> f64 {
        (self.alpha)(r)
    }

    pub fn alpha_prime(&self, r: f64) -> f64 {
        match &self.d1 {
            Some(d) => d(r),
            None => {
                let h = 1e-3 * r;
                let a = &self.alpha;
                (-a(r + 2.0 * h) + 8.0 * a(r + h) - 8.0 * a(r - h) + a(r - 2.0 * h)) / (12.0 * h)
            }
        }
    }

    pub fn alpha_second(&self, r: f64) -> f64 {
        match &self.d2 {
            Some(d) => d(r),
            None => {
                let h = 1e-3 * r;
                let a = &self.alpha;
                (-a(r + 2.0 * h) + 16.0 * a(r + h) - 30.0 * a(r) + 16.0 * a(r - h) - a(r - 2.0 * h))
                    / (12.0 * h * h)
            }
        }
    }

    /// `α^ρ(r) = α(ρr)`.
    pub fn rescaled(&self, rho: f64) -> Self {
        let a = self.alpha.clone();
        let mut out = Self::new(move |r| a(rho * r));
        if let Some(d1) = self.d1.clone() {
            out.d1 = Some(Arc::new(move |r| rho * d1(rho * r)));
        }
        if let Some(d2) = self.d2.clone() {
            out.d2 = Some(Arc::new(move |r| rho * rho * d2(rho * r)));
        }
        out
    }

    /// `sup (r|α′| + r²|α″|)` over `samples` log-spaced radii in `(0, 1)`.
    pub fn flatness(&self, samples: usize) -> f64 {
        (0..samples)
            .map(|i| {
                let r = (-12.0 * (i as f64 + 0.5) / samples as f64).exp();
                r * self.alpha_prime(r).abs() + r * r * self.alpha_second(r).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Checks that `α`, `α′`, `α″` are finite at sampled radii in `(0, r_max]`.
    pub fn validate(&self, r_max: f64) -> Result<()> {
        for i in 0..64 {
            let r = r_max * (-10.0 * i as f64 / 63.0).exp();
            let vals = [self.alpha(r), self.alpha_prime(r), self.alpha_second(r)];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("crack parametrization not finite at r = {r}")));
            }
        }
        Ok(())
    }

    /// Angle `ϑ(t) = α(e^{−t})`.
    pub fn theta(&self, t: f64) -> f64 {
        self.alpha((-t).exp())
    }

    /// `ϑ̇(t) = −e^{−t}α′(e^{−t})`.
    pub fn theta_dot(&self, t: f64) -> f64 {
        let r = (-t).exp();
        -r * self.alpha_prime(r)
    }

    /// `ϑ̈(t) = e^{−t}α′(e^{−t}) + e^{−2t}α″(e^{−t})`.
    pub fn theta_ddot(&self, t: f64) -> f64 {
        let r = (-t).exp();
        r * self.alpha_prime(r) + r * r * self.alpha_second(r)
    }
}

/// `u^ρ(φ, r) = ρ^{−1/2} u(φ + α(ρr), ρr)`.
#[derive(Debug, Clone)]
pub struct Rescaled<F> {
    inner: F,
    crack: CrackParametrization,
    rho: f64,
}

impl<F: PolarField> PolarField for Rescaled<F> {
    fn value(&self, phi: f64, r: f64) -> f64 {
        let s = self.rho * r;
        self.inner.value(phi + self.crack.alpha(s), s) / self.rho.sqrt()
    }

    fn gradient(&self, phi: f64, r: f64) -> PolarGradient {
        let s = self.rho * r;
        let g = self.inner.gradient(phi + self.crack.alpha(s), s);
        let sr = self.rho.sqrt();
        PolarGradient {
            d_r: sr * (g.d_r + self.crack.alpha_prime(s) * s * g.d_phi_over_r),
            d_phi_over_r: sr * g.d_phi_over_r,
        }
    }
}

impl<F> Rescaled<F> {
    /// The rescaled crack `α^ρ`.
    pub fn crack(&self) -> CrackParametrization {
        self.crack.rescaled(self.rho)
    }
}

/// Rescaling with `0 < ρ ≤ ¼`.
pub fn rescale<F: PolarField>(u: F, alpha: &CrackParametrization, rho: f64) -> Result<Rescaled<F>> {
    if !(rho > 0.0 && rho <= 0.25) {
        return Err(Error::Domain(format!("rescaling factor {rho} outside (0, 1/4]")));
    }
    Ok(Rescaled { inner: u, crack: alpha.clone(), rho })
}

/// `∫_{B_r} |∇u|²` and a half-resolution error estimate.
pub fn disk_energy_with_error<F: PolarField + ?Sized>(u: &F, r: f64, panels: usize) -> Result<(f64, f64)> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("radius {r} outside (0, 1]")));
    }
    let q = |p: usize| {
        let rs = GaussRule::composite(0.0, r, p, 8);
        let ps = GaussRule::composite(0.0, 2.0 * PI, 2 * p, 8);
        rs.integrate(|s| s * ps.integrate(|phi| u.gradient(phi, s).norm_sq()))
    };
    let fine = q(panels);
    let coarse = q((panels / 2).max(1));
    Ok((fine, (fine - coarse).abs()))
}

/// `∫_{B_r} |∇u|²` by polar Gauss–Legendre quadrature.
pub fn disk_energy<F: PolarField + ?Sized>(u: &F, r: f64) -> Result<f64> {
    Ok(disk_energy_with_error(u, r, 16)?.0)
}

/// Log-polar data `(ϑ, f)` with `f(φ, t) = e^{t/2} w(φ + ϑ(t), e^{−t})`.
#[derive(Debug, Clone)]
pub struct LogPolarState {
    pub crack: CrackParametrization,
    pub f: CylinderField,
}

impl LogPolarState {
    pub fn theta(&self, t: f64) -> f64 {
        self.crack.theta(t)
    }

    /// `max_t (|f(0,t)|, |f(2π,t)|)`.
    pub fn dirichlet_defect(&self) -> f64 {
        let last = self.f.n_phi() - 1;
        (0..self.f.n_t()).map(|j| self.f.at(0, j).abs().max(self.f.at(last, j).abs())).fold(0.0, f64::max)
    }
}

/// Samples `f(φ, t) = e^{t/2} w(φ + ϑ(t), e^{−t})` on the cylinder.
pub fn to_log_polar<F: PolarField + ?Sized>(
    w: &F,
    alpha: &CrackParametrization,
    cylinder: CylinderGrid,
) -> Result<LogPolarState> {
    if cylinder.t.lo() < 0.0 {
        return Err(Error::Domain(format!("t-range starts at {} < 0 (outside the unit disk)", cylinder.t.lo())));
    }
    alpha.validate((-cylinder.t.lo()).exp())?;
    let f = CylinderField::from_fn(cylinder, |phi, t| {
        (0.5 * t).exp() * w.value(phi + alpha.theta(t), (-t).exp())
    });
    Ok(LogPolarState { crack: alpha.clone(), f })
}

/// The field `w(θ, r) = r^{1/2} f(θ − ϑ(−ln r), −ln r)`, interpolated from samples.
#[derive(Debug, Clone)]
pub struct LogPolarField {
    state: LogPolarState,
}

impl PolarField for LogPolarField {
    fn value(&self, theta: f64, r: f64) -> f64 {
        let t = -r.ln();
        let phi = theta - self.state.theta(t);
        self.state.f.interpolate(phi, t).map_or(f64::NAN, |v| r.sqrt() * v)
    }
}

pub fn from_log_polar(state: &LogPolarState) -> LogPolarField {
    LogPolarField { state: state.clone() }
}

/// Samples `u` on a tensor grid in `(φ, r)` for export.
pub fn sample_polar<F: PolarField + ?Sized>(u: &F, grid: CylinderGrid) -> Result<CylinderField> {
    if grid.t.lo() <= 0.0 {
        return Err(Error::Domain("polar sampling needs r > 0".into()));
    }
    Ok(CylinderField::from_fn(grid, |phi, r| u.value(phi, r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Grid1D;

    #[test]
    fn closed_form_values() {
        let p = |r, phi| PolarPoint::new(r, phi).unwrap();
        assert!((rad(p(1.0, 0.0)) - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert!(isq(p(1.0, 0.0)).abs() < 1e-15);
        assert!(isq(p(1.0, 2.0 * PI)).abs() < 1e-15);
        assert!(rad(p(4.0, PI)).abs() < 1e-15);
        assert!(PolarPoint::new(0.0, 1.0).is_err());
        assert!(PolarPoint::new(1.0, 7.0).is_err());
    }

    #[test]
    fn gradient_energy_density_and_conjugacy() {
        for &(r, phi) in &[(0.1, 0.3), (0.7, 2.0), (1.0, 5.9)] {
            let g = Rad.gradient(phi, r);
            assert!((g.norm_sq() - 1.0 / (2.0 * PI * r)).abs() < 1e-14);
            let gi = Isq.gradient(phi, r);
            let rot = g.perp();
            assert!((gi.d_r - rot.d_r).abs() < 1e-14 && (gi.d_phi_over_r - rot.d_phi_over_r).abs() < 1e-14);
            let fd = fd_gradient(&Rad, phi, r);
            assert!((fd.d_r - g.d_r).abs() < 1e-9 && (fd.d_phi_over_r - g.d_phi_over_r).abs() < 1e-9);
        }
        assert_eq!(Rad.gradient(0.0, 0.5).d_phi_over_r, 0.0);
    }

    #[test]
    fn polar_laplacian_vanishes() {
        // r⁻²f_φφ + r⁻¹(r f_r)_r by central differences on an annulus
        for f in [CrackTipField::Rad, CrackTipField::Isq] {
            for &(r, phi) in &[(0.3, 1.0), (0.8, 4.0)] {
                let h = 1e-3;
                let fpp = (f.value(phi + h, r) - 2.0 * f.value(phi, r) + f.value(phi - h, r)) / (h * h);
                let flux = |s: f64| s * (f.value(phi, s + 0.5 * h) - f.value(phi, s - 0.5 * h)) / h;
                let lap = fpp / (r * r) + (flux(r + 0.5 * h) - flux(r - 0.5 * h)) / (h * r);
                assert!(lap.abs() < 1e-5, "{f:?}: {lap}");
            }
        }
    }

    #[test]
    fn bonnet_equality() {
        for r in [0.1, 0.3, 0.5, 0.8, 1.0] {
            let (e, err) = disk_energy_with_error(&Rad, r, 16).unwrap();
            assert!((e / r - 1.0).abs() < 1e-12, "r {r}");
            assert!(err < 1e-12);
        }
        assert!((disk_energy(&Rad, 1.0).unwrap() / disk_energy(&Rad, 0.5).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(disk_energy(&FnField::zero(), 0.5).unwrap(), 0.0);
        assert!(disk_energy(&Rad, 1.5).is_err());
    }

    #[test]
    fn rescaling_homogeneity_and_semigroup() {
        let flat = CrackParametrization::constant(0.0);
        let r1 = rescale(Rad, &flat, 0.2).unwrap();
        for &(phi, r) in &[(0.4, 0.5), (3.0, 0.9)] {
            assert!((r1.value(phi, r) - Rad.value(phi, r)).abs() < 1e-14);
        }
        let bent = CrackParametrization::linear(0.3);
        let u = FnField::new(|phi, r| r * r * (phi * 0.7).sin() + r);
        let twice = rescale(rescale(u.clone(), &bent, 0.25).unwrap(), &flat, 0.2).unwrap();
        let once = rescale(u, &bent, 0.05).unwrap();
        for &(phi, r) in &[(0.4, 0.5), (3.0, 0.9), (6.0, 0.1)] {
            assert!((twice.value(phi, r) - once.value(phi, r)).abs() < 1e-13);
        }
        let c = rescale(Rad, &bent, 0.1).unwrap().crack();
        assert!((c.alpha(0.7) - 0.3 * 0.1 * 0.7).abs() < 1e-15);
        assert!(rescale(Rad, &flat, 0.3).is_err());
    }

    #[test]
    fn rescaled_gradient_matches_fd() {
        let bent = CrackParametrization::linear(0.3);
        let u = FnField::new(|phi, r| r * r * (phi * 0.7).sin() + r * phi);
        let v = rescale(u, &bent, 0.25).unwrap();
        let g = v.gradient(2.0, 0.6);
        let fd = fd_gradient(&v, 2.0, 0.6);
        assert!((g.d_r - fd.d_r).abs() < 1e-6 && (g.d_phi_over_r - fd.d_phi_over_r).abs() < 1e-6);
    }

    #[test]
    fn log_polar_of_isq_is_stationary() {
        let cyl = CylinderGrid::log_polar(65, 0.0, 3.0, 31).unwrap();
        let st = to_log_polar(&Isq, &CrackParametrization::constant(0.0), cyl).unwrap();
        for j in 0..cyl.t.n() {
            for i in 0..cyl.phi.n() {
                let want = (2.0 / PI).sqrt() * (0.5 * cyl.phi.node(i)).sin();
                assert!((st.f.at(i, j) - want).abs() < 1e-14);
            }
        }
        assert!(st.dirichlet_defect() < 1e-15);
    }

    #[test]
    fn theta_of_linear_crack() {
        let c = CrackParametrization::linear(0.2);
        for t in [0.0, 0.5, 3.0] {
            assert!((c.theta(t) - 0.2 * (-t).exp()).abs() < 1e-15);
            assert!((c.theta_dot(t) + 0.2 * (-t).exp()).abs() < 1e-15);
        }
        let fd = CrackParametrization::new(|r| 0.2 * r + r * r);
        assert!((fd.alpha_prime(0.5) - 1.2).abs() < 1e-9);
        assert!((fd.alpha_second(0.5) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn log_polar_round_trip() {
        let cyl = CylinderGrid::log_polar(129, 0.1, 3.0, 121).unwrap();
        let crack = CrackParametrization::linear(0.1);
        let st = to_log_polar(&Isq, &crack, cyl).unwrap();
        let back = to_log_polar(&from_log_polar(&st), &crack, cyl).unwrap();
        assert!(back.f.combine(1.0, &st.f, -1.0).unwrap().max_abs() < 1e-9);
        let bad = CylinderGrid::new(Grid1D::angular(9).unwrap(), Grid1D::new(-1.0, 1.0, 9).unwrap());
        assert!(to_log_polar(&Isq, &crack, bad).is_err());
    }
}
