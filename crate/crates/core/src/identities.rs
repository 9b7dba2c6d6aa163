//! Inner-variation boundary identities checked by quadrature.
//!
//! For a field `u` in the crack-relative chart of `S = {s(cos α(s), sin α(s))}`
//! and a test field `η`, the general identity on `B_r` reads
//!
//! ```text
//! ∫_{B_r∖S} |∇u|² div η − 2∇uᵀ∇η∇u + ∫_{S∩B_r} eᵀ∇η e
//!     = ∫_{∂B_r∖S} |∇u|² η·ν − 2u_ν ∇u·η + e(p)·η(p)
//! ```
//!
//! with `e(p)·p > 0`. Bulk integrals use Gauss–Legendre in `(s, ψ)` where
//! `θ = ψ + α(s)`, so the slit `ψ ∈ {0, 2π}` is never evaluated.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{CrackParametrization, PolarField};
use crate::numerics::GaussRule;

pub type Vec2 = [f64; 2];
/// `J[i][j] = ∂_j η_i`.
pub type Mat2 = [[f64; 2]; 2];

type MapFn = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
type JacFn = Arc<dyn Fn(Vec2) -> Mat2 + Send + Sync>;

/// Tolerance on the Cauchy–Riemann relations for fields declared conformal.
pub const CONFORMAL_TOL: f64 = 1e-10;

/// Test vector field with its Jacobian.
#[derive(Clone)]
pub struct VectorField2D {
    eta: MapFn,
    jac: JacFn,
    conformal: bool,
    label: String,
}

impl fmt::Debug for VectorField2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField2D").field("label", &self.label).field("conformal", &self.conformal).finish()
    }
}

fn cr_defect(j: Mat2) -> f64 {
    (j[0][0] - j[1][1]).abs().max((j[0][1] + j[1][0]).abs())
}

impl VectorField2D {
    /// A field declared conformal is checked against Cauchy–Riemann on a grid of the unit disk.
    pub fn new(
        label: impl Into<String>,
        eta: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static,
        jac: impl Fn(Vec2) -> Mat2 + Send + Sync + 'static,
        conformal: bool,
    ) -> Result<Self> {
        let f = Self { eta: Arc::new(eta), jac: Arc::new(jac), conformal, label: label.into() };
        if conformal {
            for i in 1..=6 {
                for k in 0..12 {
                    let (r, th) = (i as f64 / 6.0, k as f64 * PI / 6.0);
                    let x = [r * th.cos(), r * th.sin()];
                    let scale = 1.0 + f.jacobian(x).iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
                    if cr_defect(f.jacobian(x)) > CONFORMAL_TOL * scale {
                        return Err(Error::Domain(format!("{} declared conformal but fails Cauchy–Riemann", f.label)));
                    }
                }
            }
        }
        Ok(f)
    }

    pub fn eval(&self, x: Vec2) -> Vec2 {
        (self.eta)(x)
    }

    pub fn jacobian(&self, x: Vec2) -> Mat2 {
        (self.jac)(x)
    }

    pub fn is_conformal(&self) -> bool {
        self.conformal
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn constant(v: Vec2) -> Self {
        Self::new(format!("constant({}, {})", v[0], v[1]), move |_| v, |_| [[0.0; 2]; 2], true).expect("conformal")
    }

    /// `η(x) = x`.
    pub fn identity() -> Self {
        Self::new("identity", |x| x, |_| [[1.0, 0.0], [0.0, 1.0]], true).expect("conformal")
    }

    /// `η(x) = x^⊥ = (−x₂, x₁)`.
    pub fn rotation() -> Self {
        Self::new("rotation", |x| [-x[1], x[0]], |_| [[0.0, -1.0], [1.0, 0.0]], true).expect("conformal")
    }

    /// `η = (x₁² − x₂², 2x₁x₂)`.
    pub fn z_squared() -> Self {
        Self::complex_polynomial(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]).relabel("z^2")
    }

    /// `η = (Re p(z), Im p(z))` with `p(z) = Σ c_n zⁿ`.
    pub fn complex_polynomial(coeffs: &[(f64, f64)]) -> Self {
        let c: Vec<(f64, f64)> = coeffs.to_vec();
        let c2 = c.clone();
        let eval = move |x: Vec2| {
            let (mut re, mut im) = (0.0, 0.0);
            for &(a, b) in c.iter().rev() {
                let (nr, ni) = (re * x[0] - im * x[1], re * x[1] + im * x[0]);
                re = nr + a;
                im = ni + b;
            }
            [re, im]
        };
        let jac = move |x: Vec2| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &(a, b)) in c2.iter().enumerate().skip(1).rev() {
                let (nr, ni) = (re * x[0] - im * x[1], re * x[1] + im * x[0]);
                re = nr + n as f64 * a;
                im = ni + n as f64 * b;
            }
            [[re, -im], [im, re]]
        };
        Self::new("complex polynomial", eval, jac, true).expect("holomorphic maps are conformal")
    }

    /// Component-wise real polynomial `η_i = Σ c x₁^a x₂^b` from `(a, b, c)` terms.
    pub fn polynomial(terms: [Vec<(u32, u32, f64)>; 2]) -> Result<Self> {
        let t = Arc::new(terms);
        let t2 = t.clone();
        let mono = |x: Vec2, a: u32, b: u32| x[0].powi(a as i32) * x[1].powi(b as i32);
        let eval = move |x: Vec2| {
            let e = |ts: &[(u32, u32, f64)]| ts.iter().map(|&(a, b, c)| c * mono(x, a, b)).sum();
            [e(&t[0]), e(&t[1])]
        };
        let jac = move |x: Vec2| {
            let d = |ts: &[(u32, u32, f64)], dir: usize| -> f64 {
                ts.iter()
                    .map(|&(a, b, c)| match dir {
                        0 if a > 0 => c * a as f64 * mono(x, a - 1, b),
                        1 if b > 0 => c * b as f64 * mono(x, a, b - 1),
                        _ => 0.0,
                    })
                    .sum()
            };
            [[d(&t2[0], 0), d(&t2[0], 1)], [d(&t2[1], 0), d(&t2[1], 1)]]
        };
        Self::new("polynomial", eval, jac, false)
    }

    fn relabel(mut self, label: &str) -> Self {
        self.label = label.into();
        self
    }
}

/// Random holomorphic polynomial of degree `1..=max_degree`, coefficients in `[−1, 1]²`.
pub fn random_conformal<R: Rng>(rng: &mut R, max_degree: usize) -> VectorField2D {
    let deg = rng.gen_range(1..=max_degree.max(1));
    let c: Vec<(f64, f64)> = (0..=deg).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    VectorField2D::complex_polynomial(&c).relabel("random conformal")
}

/// Random real polynomial field of total degree `≤ max_degree`; almost surely non-conformal.
pub fn random_polynomial<R: Rng>(rng: &mut R, max_degree: u32) -> VectorField2D {
    let mut terms = [Vec::new(), Vec::new()];
    for comp in terms.iter_mut() {
        for a in 0..=max_degree {
            for b in 0..=(max_degree - a) {
                comp.push((a, b, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    VectorField2D::polynomial(terms).expect("non-conformal fields are not checked").relabel("random polynomial")
}

/// Gauss–Legendre layout for the polar integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub radial_panels: usize,
    pub angular_panels: usize,
    pub points: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { radial_panels: 8, angular_panels: 16, points: 8 }
    }
}

impl QuadratureSpec {
    fn halved(&self) -> Self {
        Self {
            radial_panels: (self.radial_panels / 2).max(1),
            angular_panels: (self.angular_panels / 2).max(1),
            points: self.points,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.radial_panels < 2 || self.angular_panels < 2 || self.points < 2 {
            return Err(Error::Config("quadrature needs at least 2 panels and 2 points".into()));
        }
        Ok(())
    }
}

/// Named contributions to an identity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityTerms {
    pub bulk: f64,
    pub crack: f64,
    pub boundary: f64,
    pub endpoint: f64,
}

impl IdentityTerms {
    fn abs_sum(&self) -> f64 {
        self.bulk.abs() + self.crack.abs() + self.boundary.abs() + self.endpoint.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub radius: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs − rhs`.
    pub residual: f64,
    pub terms: IdentityTerms,
    /// `|fine − half-resolution|` on the residual, plus a rounding floor.
    pub error_estimate: f64,
    pub quadrature: QuadratureSpec,
    /// Whether the endpoint tangent was flipped against the `e·p > 0` rule.
    pub flipped_orientation: bool,
}

/// Rounding floor added to every quadrature error estimate, relative to the term sizes.
const ROUNDING_FLOOR: f64 = 1e-13;

/// Cartesian gradient and the actual polar angle of the chart point `(ψ, s)`.
fn cartesian_gradient<F: PolarField + ?Sized>(u: &F, crack: &CrackParametrization, psi: f64, s: f64) -> (f64, Vec2) {
    let g = u.gradient(psi, s);
    let ur = g.d_r - crack.alpha_prime(s) * s * g.d_phi_over_r;
    let ut = g.d_phi_over_r;
    let th = psi + crack.alpha(s);
    let (c, sn) = (th.cos(), th.sin());
    (th, [ur * c - ut * sn, ur * sn + ut * c])
}

fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `|v|² div η − 2vᵀ∇η v`.
pub fn bulk_form(v: Vec2, j: Mat2) -> f64 {
    let quad = v[0] * (j[0][0] * v[0] + j[0][1] * v[1]) + v[1] * (j[1][0] * v[0] + j[1][1] * v[1]);
    dot(v, v) * (j[0][0] + j[1][1]) - 2.0 * quad
}

/// Unit tangent `e` at `|p| = r`, oriented with `e·p > 0`.
fn endpoint_tangent(crack: &CrackParametrization, r: f64) -> Result<(Vec2, Vec2)> {
    let a = crack.alpha(r);
    let ap = crack.alpha_prime(r);
    let (c, s) = (a.cos(), a.sin());
    let g = [c - r * ap * s, s + r * ap * c];
    let n = dot(g, g).sqrt();
    let e = [g[0] / n, g[1] / n];
    let p = [r * c, r * s];
    if !(dot(e, p) > 1e-12 * r) {
        return Err(Error::Domain(format!("crack meets ∂B_{r} tangentially")));
    }
    Ok((e, p))
}

fn terms_with<F: PolarField + ?Sized>(
    u: &F,
    crack: &CrackParametrization,
    r: f64,
    eta: &VectorField2D,
    q: QuadratureSpec,
    flip: bool,
) -> Result<IdentityTerms> {
    let radial = GaussRule::composite(0.0, r, q.radial_panels, q.points);
    let angular = GaussRule::composite(0.0, 2.0 * PI, q.angular_panels, q.points);

    let bulk = radial.integrate(|s| {
        s * angular.integrate(|psi| {
            let (th, g) = cartesian_gradient(u, crack, psi, s);
            bulk_form(g, eta.jacobian([s * th.cos(), s * th.sin()]))
        })
    });

    let crack_term = radial.integrate(|s| {
        let a = crack.alpha(s);
        let ap = crack.alpha_prime(s);
        let g = [a.cos() - s * ap * a.sin(), a.sin() + s * ap * a.cos()];
        let n = dot(g, g).sqrt();
        let e = [g[0] / n, g[1] / n];
        let j = eta.jacobian([s * a.cos(), s * a.sin()]);
        let quad = e[0] * (j[0][0] * e[0] + j[0][1] * e[1]) + e[1] * (j[1][0] * e[0] + j[1][1] * e[1]);
        quad * n
    });

    let boundary = r * angular.integrate(|psi| {
        let (th, g) = cartesian_gradient(u, crack, psi, r);
        let nu = [th.cos(), th.sin()];
        let et = eta.eval([r * nu[0], r * nu[1]]);
        dot(g, g) * dot(et, nu) - 2.0 * dot(g, nu) * dot(g, et)
    });

    let (mut e, p) = endpoint_tangent(crack, r)?;
    if flip {
        e = [-e[0], -e[1]];
    }
    let endpoint = dot(e, eta.eval(p));

    let t = IdentityTerms { bulk, crack: crack_term, boundary, endpoint };
    if !(bulk.is_finite() && crack_term.is_finite() && boundary.is_finite()) {
        return Err(Error::Numerical("quadrature failed near the slit".into()));
    }
    Ok(t)
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("radius {r} outside (0, 1]")));
    }
    Ok(())
}

fn general_report(t: IdentityTerms, coarse: IdentityTerms, identity: &str, r: f64, q: QuadratureSpec, flip: bool) -> IdentityReport {
    let lhs = t.bulk + t.crack;
    let rhs = t.boundary + t.endpoint;
    let coarse_res = coarse.bulk + coarse.crack - coarse.boundary - coarse.endpoint;
    IdentityReport {
        identity: identity.into(),
        radius: r,
        lhs,
        rhs,
        residual: lhs - rhs,
        terms: t,
        error_estimate: ((lhs - rhs) - coarse_res).abs() + ROUNDING_FLOOR * t.abs_sum().max(1.0),
        quadrature: q,
        flipped_orientation: flip,
    }
}

/// The general identity for `η`.
pub fn boundary_variation_report<F: PolarField + ?Sized>(
    u: &F,
    crack: &CrackParametrization,
    r: f64,
    eta: &VectorField2D,
) -> Result<IdentityReport> {
    boundary_variation_report_with(u, crack, r, eta, QuadratureSpec::default(), false)
}

/// As [`boundary_variation_report`] with explicit quadrature and an optional
/// flip of the endpoint tangent.
pub fn boundary_variation_report_with<F: PolarField + ?Sized>(
    u: &F,
    crack: &CrackParametrization,
    r: f64,
    eta: &VectorField2D,
    q: QuadratureSpec,
    flip: bool,
) -> Result<IdentityReport> {
    check_radius(r)?;
    q.validate()?;
    let fine = terms_with(u, crack, r, eta, q, flip)?;
    let coarse = terms_with(u, crack, r, eta, q.halved(), flip)?;
    Ok(general_report(fine, coarse, eta.label(), r, q, flip))
}

/// Largest `|bulk_form|` over the bulk quadrature nodes.
pub fn max_bulk_integrand<F: PolarField + ?Sized>(
    u: &F,
    crack: &CrackParametrization,
    r: f64,
    eta: &VectorField2D,
    q: QuadratureSpec,
) -> Result<f64> {
    check_radius(r)?;
    let radial = GaussRule::composite(0.0, r, q.radial_panels, q.points);
    let angular = GaussRule::composite(0.0, 2.0 * PI, q.angular_panels, q.points);
    let mut worst = 0.0f64;
    for &s in &radial.nodes {
        for &psi in &angular.nodes {
            let (th, g) = cartesian_gradient(u, crack, psi, s);
            worst = worst.max(bulk_form(g, eta.jacobian([s * th.cos(), s * th.sin()])).abs());
        }
    }
    Ok(worst)
}

/// `ℋ¹(S ∩ B_r) = ∫₀ʳ √(1 + (sα′)²) ds`.
pub fn crack_length(crack: &CrackParametrization, r: f64) -> f64 {
    GaussRule::composite(0.0, r, 8, 8).integrate(|s| (1.0 + (s * crack.alpha_prime(s)).powi(2)).sqrt())
}

/// The same length from the log-polar chart: `∫_{−ln r}^∞ e^{−t}√(1 + ϑ̇²) dt`.
pub fn crack_length_log_polar(crack: &CrackParametrization, r: f64) -> f64 {
    let t0 = -r.ln();
    GaussRule::composite(t0, t0 + 40.0, 80, 8)
        .integrate(|t| (-t).exp() * (1.0 + crack.theta_dot(t).powi(2)).sqrt())
}

/// `η(x) = x`: `(1/r)ℋ¹(S∩B_r) = ∫_{∂B_r}(u_τ² − u_ν²) + e(p)·ν(p)`.
pub fn dlms<F: PolarField + ?Sized>(u: &F, crack: &CrackParametrization, r: f64) -> Result<IdentityReport> {
    dlms_with(u, crack, r, QuadratureSpec::default())
}

pub fn dlms_with<F: PolarField + ?Sized>(
    u: &F,
    crack: &CrackParametrization,
    r: f64,
    q: QuadratureSpec,
) -> Result<IdentityReport> {
    check_radius(r)?;
    q.validate()?;
    let eval = |q: QuadratureSpec| -> Result<IdentityTerms> {
        let angular = GaussRule::composite(0.0, 2.0 * PI, q.angular_panels, q.points);
        let boundary = r * angular.integrate(|psi| {
            let (th, g) = cartesian_gradient(u, crack, psi, r);
            let nu = [th.cos(), th.sin()];
            let tau = [-nu[1], nu[0]];
            dot(g, tau).powi(2) - dot(g, nu).powi(2)
        });
        let (e, p) = endpoint_tangent(crack, r)?;
        Ok(IdentityTerms {
            bulk: 0.0,
            crack: crack_length(crack, r) / r,
            boundary,
            endpoint: dot(e, [p[0] / r, p[1] / r]),
        })
    };
    let fine = eval(q)?;
    let coarse = eval(q.halved())?;
    Ok(general_report(fine, coarse, "dlms", r, q, false))
}

/// `∫_{∂B_r∖{p}} |∇u|² ν·τ(p) + 2u_ν ∇u·(τ − τ(p))`, with `rhs = 0`.
pub fn am_identity<F: PolarField + ?Sized>(u: &F, crack: &CrackParametrization, r: f64) -> Result<IdentityReport> {
    check_radius(r)?;
    let q = QuadratureSpec::default();
    let eval = |q: QuadratureSpec| -> Result<f64> {
        let (_, p) = endpoint_tangent(crack, r)?;
        let tp = [-p[1] / r, p[0] / r];
        let angular = GaussRule::composite(0.0, 2.0 * PI, q.angular_panels, q.points);
        Ok(r * angular.integrate(|psi| {
            let (th, g) = cartesian_gradient(u, crack, psi, r);
            let nu = [th.cos(), th.sin()];
            let tau = [-nu[1], nu[0]];
            dot(g, g) * dot(nu, tp) + 2.0 * dot(g, nu) * dot(g, [tau[0] - tp[0], tau[1] - tp[1]])
        }))
    };
    let fine = eval(q)?;
    let coarse = eval(q.halved())?;
    let terms = IdentityTerms { boundary: fine, ..IdentityTerms::default() };
    Ok(IdentityReport {
        identity: "am".into(),
        radius: r,
        lhs: fine,
        rhs: 0.0,
        residual: fine,
        terms,
        error_estimate: (fine - coarse).abs() + ROUNDING_FLOOR * fine.abs().max(1.0),
        quadrature: q,
        flipped_orientation: false,
    })
}

/// Same integral for the harmonic conjugate `w` (`∇w = (∇u)^⊥`):
/// `∫ |∇w|² ν·τ(p) − 2w_τ ∇w·(ν − ν(p))`.
pub fn am_identity_conjugate<F: PolarField + ?Sized>(w: &F, crack: &CrackParametrization, r: f64) -> Result<f64> {
    check_radius(r)?;
    let (_, p) = endpoint_tangent(crack, r)?;
    let np = [p[0] / r, p[1] / r];
    let tp = [-np[1], np[0]];
    let q = QuadratureSpec::default();
    let angular = GaussRule::composite(0.0, 2.0 * PI, q.angular_panels, q.points);
    Ok(r * angular.integrate(|psi| {
        let (th, g) = cartesian_gradient(w, crack, psi, r);
        let nu = [th.cos(), th.sin()];
        let tau = [-nu[1], nu[0]];
        dot(g, g) * dot(nu, tp) - 2.0 * dot(g, tau) * dot(g, [nu[0] - np[0], nu[1] - np[1]])
    }))
}

/// Polar form of the conjugate identity with `ψ` measured from `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmPolarForm {
    /// `∫ (r w_r² − w_ψ²/r) sin ψ dψ`.
    pub a: f64,
    /// `2∫ w_r w_ψ (1 − cos ψ) dψ`.
    pub b: f64,
    /// `a − b`; zero for critical points.
    pub residual: f64,
    /// The variant with weights `r sin ψ` and `1 + cos ψ`, for comparison.
    pub alt_a: f64,
    pub alt_b: f64,
    pub alt_residual: f64,
}

pub fn am_polar_conjugate<F: PolarField + ?Sized>(w: &F, crack: &CrackParametrization, r: f64) -> Result<AmPolarForm> {
    check_radius(r)?;
    let q = QuadratureSpec::default();
    let angular = GaussRule::composite(0.0, 2.0 * PI, q.angular_panels, q.points);
    let parts = |psi: f64| {
        let g = w.gradient(psi, r);
        let wr = g.d_r - crack.alpha_prime(r) * r * g.d_phi_over_r;
        let wpsi = g.d_phi_over_r * r;
        (wr, wpsi)
    };
    let base = |psi: f64| {
        let (wr, wp) = parts(psi);
        r * wr * wr - wp * wp / r
    };
    let a = angular.integrate(|psi| base(psi) * psi.sin());
    let b = 2.0 * angular.integrate(|psi| {
        let (wr, wp) = parts(psi);
        wr * wp * (1.0 - psi.cos())
    });
    let alt_a = angular.integrate(|psi| base(psi) * psi.sin() * r);
    let alt_b = 2.0 * angular.integrate(|psi| {
        let (wr, wp) = parts(psi);
        wr * wp * (1.0 + psi.cos())
    });
    Ok(AmPolarForm { a, b, residual: a - b, alt_a, alt_b, alt_residual: alt_a - alt_b })
}

/// Constant field `v`: `0 = ∫(|∇u|² v·ν − 2u_ν u_v) + e(p)·v`.
pub fn translation_identity<F: PolarField + ?Sized>(
    u: &F,
    crack: &CrackParametrization,
    r: f64,
    v: Vec2,
) -> Result<IdentityReport> {
    let mut rep = boundary_variation_report(u, crack, r, &VectorField2D::constant(v))?;
    rep.identity = "translation".into();
    Ok(rep)
}

/// `η = x^⊥`: `0 = e(p)·τ(p) − 2∫ u_ν u_τ` after dividing by `r`.
pub fn rotation_identity<F: PolarField + ?Sized>(u: &F, crack: &CrackParametrization, r: f64) -> Result<IdentityReport> {
    let mut rep = boundary_variation_report(u, crack, r, &VectorField2D::rotation())?;
    rep.identity = "rotation".into();
    Ok(rep)
}
