//! The nonlinear log-polar system for `(f, ϑ)`, the curvature formula, and
//! the check that the linearized system is its first variation about `(isq, 0)`.
//!
//! ```text
//! f_t = f/4 + f_φφ + f_tt + (ϑ̇f_φ + ϑ̇²f_φφ − 2ϑ̇f_tφ − ϑ̈f_φ)
//! f(0, t) = f(2π, t) = 0
//! (ϑ̈ − ϑ̇ − ϑ̇³)/(1 + ϑ̇²)^{5/2} = f_φ²(2π, t) − f_φ²(0, t)
//! ```

use serde::{Deserialize, Serialize};

use crate::cylinder::CylinderField;
use crate::error::{Error, Result};
use crate::fields::{CrackParametrization, Isq, PolarField};
use crate::linearized::{LinearizedTrajectory, TimeSeries, BOUNDARY_TOL};
use crate::numerics::{linear_fit, Grid1D, DEFAULT_FD_ACCURACY};

/// `(f, ϑ)` on a cylinder grid.
#[derive(Debug, Clone)]
pub struct NonlinearState {
    f: CylinderField,
    theta: TimeSeries,
}

impl NonlinearState {
    pub fn new(f: CylinderField, theta: TimeSeries) -> Result<Self> {
        if theta.grid != f.grid().t {
            return Err(Error::GridMismatch);
        }
        let scale = f.max_abs().max(1.0);
        let np = f.n_phi();
        for j in 0..f.n_t() {
            if f.at(0, j).abs() > BOUNDARY_TOL * scale || f.at(np - 1, j).abs() > BOUNDARY_TOL * scale {
                return Err(Error::Domain(format!("Dirichlet trace of f violated at t-node {j}")));
            }
        }
        Ok(Self { f, theta })
    }

    /// `f = isq + δv`, `ϑ = δλ`.
    pub fn perturbation(traj: &LinearizedTrajectory, delta: f64) -> Result<Self> {
        let g = *traj.grid();
        let base = CylinderField::from_fn(g, |p, _| Isq.value(p, 1.0));
        let f = base.combine(1.0, traj.v(), delta)?;
        let lam = traj.lambda();
        let sc = |v: &[f64]| v.iter().map(|x| delta * x).collect();
        let theta = TimeSeries {
            grid: lam.grid,
            value: sc(&lam.value),
            dot: sc(&lam.dot),
            ddot: sc(&lam.ddot),
            source: lam.source,
        };
        Self::new(f, theta)
    }

    pub fn f(&self) -> &CylinderField {
        &self.f
    }

    pub fn theta(&self) -> &TimeSeries {
        &self.theta
    }
}

#[derive(Debug, Clone)]
pub struct SisResidual {
    pub pde: CylinderField,
    /// `max(|f(0,t)|, |f(2π,t)|)`.
    pub bc: Vec<f64>,
    pub transmission: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SisNorms {
    pub pde: f64,
    pub bc: f64,
    pub transmission: f64,
}

impl SisResidual {
    pub fn norms(&self) -> SisNorms {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        SisNorms { pde: self.pde.max_abs(), bc: m(&self.bc), transmission: m(&self.transmission) }
    }
}

pub fn sis_residual(state: &NonlinearState) -> Result<SisResidual> {
    sis_residual_with(state, DEFAULT_FD_ACCURACY)
}

pub fn sis_residual_with(state: &NonlinearState, accuracy: usize) -> Result<SisResidual> {
    let f = &state.f;
    let g = *f.grid();
    if g.phi.n() < 16 || g.t.n() < 16 {
        return Err(Error::GridTooSmall(g.phi.n().min(g.t.n())));
    }
    let fp = f.d_phi_with(1, accuracy)?;
    let fpp = f.d_phi_with(2, accuracy)?;
    let ft = f.d_t_with(1, accuracy)?;
    let ftt = f.d_t_with(2, accuracy)?;
    let ftp = fp.d_t_with(1, accuracy)?;
    let th = &state.theta;
    let np = f.n_phi();
    let mut pde = Vec::with_capacity(g.len());
    for j in 0..f.n_t() {
        let (d, dd) = (th.dot[j], th.ddot[j]);
        for i in 0..np {
            let k = j * np + i;
            let (v, vp, vpp, vt, vtt, vtp) =
                (f.values()[k], fp.values()[k], fpp.values()[k], ft.values()[k], ftt.values()[k], ftp.values()[k]);
            pde.push(vt - 0.25 * v - vpp - vtt - (d * vp + d * d * vpp - 2.0 * d * vtp - dd * vp));
        }
    }
    let bc = (0..f.n_t()).map(|j| f.at(0, j).abs().max(f.at(np - 1, j).abs())).collect();
    let transmission = (0..f.n_t())
        .map(|j| {
            let (d, dd) = (th.dot[j], th.ddot[j]);
            let lhs = (dd - d - d * d * d) / (1.0 + d * d).powf(2.5);
            lhs - (fp.at(np - 1, j).powi(2) - fp.at(0, j).powi(2))
        })
        .collect();
    Ok(SisResidual { pde: CylinderField::new(g, pde)?, bc, transmission })
}

/// `𝐤 = r⁻¹(ϑ̇ + ϑ̇³ − ϑ̈)/(1 + ϑ̇²)^{3/2}` at `r = e^{−t}`.
pub fn curvature(theta_dot: f64, theta_ddot: f64, t: f64) -> f64 {
    let d = theta_dot;
    t.exp() * (d + d * d * d - theta_ddot) / (1.0 + d * d).powf(1.5)
}

/// Curvature of the crack at radius `r`.
pub fn curvature_profile(crack: &CrackParametrization, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("radius {r} outside (0, 1)")));
    }
    let t = -r.ln();
    Ok(curvature(crack.theta_dot(t), crack.theta_ddot(t), t))
}

/// `ϑ(t) = α(e^{−t})` sampled with its derivatives.
pub fn theta_from_alpha(crack: &CrackParametrization, grid: Grid1D) -> Result<TimeSeries> {
    if grid.lo() < 0.0 {
        return Err(Error::Domain("ϑ needs t ≥ 0".into()));
    }
    Ok(TimeSeries::analytic(grid, |t| [crack.theta(t), crack.theta_dot(t), crack.theta_ddot(t)]))
}

/// `α(r) = ϑ(−ln r)`, from any `ϑ` with two derivatives.
pub fn alpha_from_theta(
    theta: impl Fn(f64) -> [f64; 3] + Send + Sync + Clone + 'static,
) -> CrackParametrization {
    let (t1, t2) = (theta.clone(), theta.clone());
    CrackParametrization::with_derivatives(
        move |r| theta(-r.ln())[0],
        // α′(r) = −ϑ̇/r, α″(r) = (ϑ̇ + ϑ̈)/r²
        move |r| -t1(-r.ln())[1] / r,
        move |r| {
            let [_, d, dd] = t2(-r.ln());
            (d + dd) / (r * r)
        },
    )
}

/// Residual norms for one `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub delta: f64,
    pub pde: f64,
    pub bc: f64,
    pub transmission: f64,
}

/// Fitted exponent of `residual ∝ δ^p`; `None` when the component is zero to rounding for every `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyExponents {
    pub pde: Option<f64>,
    pub bc: Option<f64>,
    pub transmission: Option<f64>,
}

impl ConsistencyExponents {
    pub fn all(&self) -> [(&'static str, Option<f64>); 3] {
        [("pde", self.pde), ("bc", self.bc), ("transmission", self.transmission)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
    pub exponents: ConsistencyExponents,
    /// Residuals below this are treated as rounding.
    pub rounding_floor: f64,
}

/// Absolute floor below which a residual counts as rounding.
pub const ROUNDING_FLOOR: f64 = 1e-13;

/// Residuals are measured relative to the residual of `(isq, 0)` on the same
/// grid, so the truncation error of the base state does not enter the fit.
pub fn linearization_consistency(traj: &LinearizedTrajectory, deltas: &[f64]) -> Result<ConsistencyReport> {
    if deltas.len() < 2 {
        return Err(Error::Domain("need at least two δ values".into()));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d <= 0.1)) {
        return Err(Error::Domain(format!("δ = {d} outside (0, 0.1]")));
    }
    let base = sis_residual(&NonlinearState::perturbation(traj, 0.0)?)?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let r = sis_residual(&NonlinearState::perturbation(traj, delta)?)?;
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        rows.push(ConsistencyRow {
            delta,
            pde: r.pde.combine(1.0, &base.pde, -1.0)?.max_abs(),
            bc: diff(&r.bc, &base.bc),
            transmission: diff(&r.transmission, &base.transmission),
        });
    }
    let fit = |sel: fn(&ConsistencyRow) -> f64| -> Result<Option<f64>> {
        if rows.iter().all(|r| sel(r) <= ROUNDING_FLOOR) {
            return Ok(None);
        }
        let xs: Vec<f64> = rows.iter().map(|r| r.delta.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| sel(r).max(f64::MIN_POSITIVE).ln()).collect();
        Ok(Some(linear_fit(&xs, &ys)?.0))
    };
    let exponents = ConsistencyExponents {
        pde: fit(|r| r.pde)?,
        bc: fit(|r| r.bc)?,
        transmission: fit(|r| r.transmission)?,
    };
    Ok(ConsistencyReport { rows, exponents, rounding_floor: ROUNDING_FLOOR })
}

/// The same `v` paired with `−λ`: the solution of the linear system with the
/// opposite sign in the third equation. Its consistency exponents drop to 1.
pub fn sign_flipped_control(traj: &LinearizedTrajectory) -> Result<LinearizedTrajectory> {
    traj.with_lambda(traj.lambda().negated())
}
