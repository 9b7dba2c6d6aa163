//! Annulus energies `𝓔, 𝓕, 𝓖` and the three-annuli dichotomy.
//!
//! On `[σ, s]`:
//!
//! ```text
//! 𝓔 = Σ_{k≥2} ∫ ν_k⁴a_k² + a_k″²
//! 𝓕 = ∫ λ̇² + λ̈² + a₀² + a₁² + a₀″² + a₁″²
//! 𝓖 = max(𝓔, c₀𝓕)
//! ```
//!
//! Coefficients come from the modal data when the trajectory was synthesized,
//! otherwise from expanding `ζ(·, t)` at every t-node.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::expand;
use crate::linearized::{
    am_linearized_condition, extra_condition, CoefficientSolution, DerivativeSource, LinearizedTrajectory,
    ModalSolution,
};
use crate::numerics::{interpolate_cubic, FdStencil, GaussRule, Grid1D, Parity, SampledFunction1D, DEFAULT_FD_ACCURACY};
use crate::ventsel::VentselSpectrum;

pub const DEFAULT_ETA: f64 = 0.05;
pub const DEFAULT_C0: f64 = 0.01;

/// `|∫ sin(φ/2) v_φ|` allowed before the `𝓖` clause is refused.
pub const PRECONDITION_TOL: f64 = 1e-6;

const GAUSS_PANELS: usize = 16;
const GAUSS_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusEnergies {
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub interval: (f64, f64),
    pub c0: f64,
    pub source: DerivativeSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Which {
    E,
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    HypothesisFalse,
    ImplicationHolds,
    #[serde(rename = "VIOLATION")]
    Violation,
    /// The `𝓖` clause only applies when the integral condition holds.
    PreconditionViolated,
}

/// Both forms of the integral condition at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionSample {
    pub sigma: f64,
    /// The condition as printed.
    pub printed: f64,
    /// `∫ sin(φ/2) v_φ`, the form used as the precondition.
    pub derived: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeAnnuliReport {
    pub base: f64,
    pub eta: f64,
    pub c0: f64,
    pub which: Which,
    pub annuli: [AnnulusEnergies; 3],
    /// `[middle/first, last/middle]` of the chosen functional.
    pub ratios: [f64; 2],
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub condition: Vec<ConditionSample>,
}

/// Result of [`EnergyEvaluator::convexity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub c_hat: f64,
    /// `min_t (h″ − ĉh)`.
    pub margin: f64,
    pub at: f64,
    /// Margin divided by `max h` on the range.
    pub relative_margin: f64,
    pub source: DerivativeSource,
}

/// `ĉ = min(2μ₂², 2(½+ν₂)²)`.
pub fn default_c_hat(sp: &VentselSpectrum) -> f64 {
    let nu = sp.nu(2);
    (2.0 * (nu - 0.5).powi(2)).min(2.0 * (0.5 + nu).powi(2))
}

/// `n`-th derivative of `D e^{pt} + C e^{qt}`.
fn mode_derivative(m: &CoefficientSolution, t: f64, n: i32) -> f64 {
    let (p, q) = (0.5 + m.nu, 0.5 - m.nu);
    m.d * p.powi(n) * (p * t).exp() + m.c * q.powi(n) * (q * t).exp()
}

enum History {
    Modal {
        /// Modes grouped by `k`, with `ν_k`.
        modes: BTreeMap<usize, (f64, Vec<CoefficientSolution>)>,
        modal: ModalSolution,
    },
    Sampled {
        grid: Grid1D,
        nus: Vec<f64>,
        /// `a[k][j]`, `k = 0..=K`.
        a: Vec<Vec<f64>>,
        add: Vec<Vec<f64>>,
        lambda_dot: Vec<f64>,
        lambda_ddot: Vec<f64>,
    },
}

/// Integrands of `𝓔` and `𝓕` along one trajectory.
pub struct EnergyEvaluator<'a> {
    traj: &'a LinearizedTrajectory,
    history: History,
}

impl<'a> EnergyEvaluator<'a> {
    /// Uses modal data when present, otherwise expands `ζ` in modes up to `sp.k_max()`.
    pub fn new(traj: &'a LinearizedTrajectory, sp: &VentselSpectrum) -> Result<Self> {
        let history = match traj.modal() {
            Some(m) => Self::modal_history(m),
            None => Self::sampled_history(traj, sp)?,
        };
        Ok(Self { traj, history })
    }

    /// Always expands, ignoring modal data.
    pub fn sampled(traj: &'a LinearizedTrajectory, sp: &VentselSpectrum) -> Result<Self> {
        Ok(Self { traj, history: Self::sampled_history(traj, sp)? })
    }

    fn modal_history(m: &ModalSolution) -> History {
        let mut modes: BTreeMap<usize, (f64, Vec<CoefficientSolution>)> = BTreeMap::new();
        for c in &m.modes {
            modes.entry(c.k).or_insert_with(|| (c.nu, Vec::new())).1.push(*c);
        }
        History::Modal { modes, modal: m.clone() }
    }

    fn sampled_history(traj: &LinearizedTrajectory, sp: &VentselSpectrum) -> Result<History> {
        let z = traj.zeta();
        let g = z.grid().t;
        if *sp.grid() != z.grid().phi {
            return Err(Error::GridMismatch);
        }
        let k_max = sp.k_max();
        let mut a = vec![Vec::with_capacity(g.n()); k_max + 1];
        for j in 0..g.n() {
            let sec = SampledFunction1D::new_unchecked(z.grid().phi, z.row(j).to_vec(), Parity::Odd);
            let c = expand(sp, &sec, k_max)?;
            for (k, row) in a.iter_mut().enumerate() {
                row.push(c.get(k));
            }
        }
        let st = FdStencil::new(g.n(), 2, DEFAULT_FD_ACCURACY)?;
        let add = a.iter().map(|row| st.apply(row, g.h())).collect();
        let nus = (0..=k_max).map(|k| if k == 0 { 0.0 } else { sp.nu(k) }).collect();
        let lam = traj.lambda();
        Ok(History::Sampled {
            grid: g,
            nus,
            a,
            add,
            lambda_dot: lam.dot.clone(),
            lambda_ddot: lam.ddot.clone(),
        })
    }

    pub fn source(&self) -> DerivativeSource {
        match self.history {
            History::Modal { .. } => DerivativeSource::Analytic,
            History::Sampled { .. } => DerivativeSource::FiniteDifference,
        }
    }

    pub fn trajectory(&self) -> &LinearizedTrajectory {
        self.traj
    }

    /// `(Σ_{k≥2} ν_k⁴a_k² + a_k″², λ̇² + λ̈² + a₀² + a₁² + a₀″² + a₁″²)` at `t`.
    pub fn integrands(&self, t: f64) -> (f64, f64) {
        match &self.history {
            History::Modal { modes, modal } => {
                let mut e = 0.0;
                for (nu, ms) in modes.values() {
                    let a: f64 = ms.iter().map(|m| mode_derivative(m, t, 0)).sum();
                    let add: f64 = ms.iter().map(|m| mode_derivative(m, t, 2)).sum();
                    e += nu.powi(4) * a * a + add * add;
                }
                let [_, ld, ldd] = modal.lambda(t);
                let a0 = modal.jordan.a0(t);
                let a1 = modal.jordan.a1(t);
                (e, ld * ld + ldd * ldd + a0[0].powi(2) + a1[0].powi(2) + a0[2].powi(2) + a1[2].powi(2))
            }
            History::Sampled { grid, nus, a, add, lambda_dot, lambda_ddot } => {
                let at = |v: &[f64]| interpolate_cubic(*grid, v, t).unwrap_or(f64::NAN);
                let mut e = 0.0;
                for k in 2..a.len() {
                    e += nus[k].powi(4) * at(&a[k]).powi(2) + at(&add[k]).powi(2);
                }
                let f = at(lambda_dot).powi(2)
                    + at(lambda_ddot).powi(2)
                    + at(&a[0]).powi(2)
                    + at(&a[1]).powi(2)
                    + at(&add[0]).powi(2)
                    + at(&add[1]).powi(2);
                (e, f)
            }
        }
    }

    fn check_interval(&self, sigma: f64, s: f64) -> Result<()> {
        let g = self.traj.grid().t;
        if !(sigma < s) || sigma < g.lo() - 1e-12 || s > g.hi() + 1e-12 {
            return Err(Error::Domain(format!("interval [{sigma}, {s}] outside [{}, {}]", g.lo(), g.hi())));
        }
        Ok(())
    }

    pub fn energies(&self, sigma: f64, s: f64, c0: f64) -> Result<AnnulusEnergies> {
        self.check_interval(sigma, s)?;
        if !(c0 > 0.0) {
            return Err(Error::Domain(format!("c₀ = {c0} must be positive")));
        }
        let rule = GaussRule::composite(sigma, s, GAUSS_PANELS, GAUSS_POINTS);
        let e = rule.integrate(|t| self.integrands(t).0);
        let f = rule.integrate(|t| self.integrands(t).1);
        if !(e.is_finite() && f.is_finite()) {
            return Err(Error::Numerical("non-finite annulus energy".into()));
        }
        Ok(AnnulusEnergies { e, f, g: e.max(c0 * f), interval: (sigma, s), c0, source: self.source() })
    }

    pub fn three_annuli(&self, base: f64, eta: f64, c0: f64, which: Which) -> Result<ThreeAnnuliReport> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Domain(format!("η = {eta} must lie in (0, 1)")));
        }
        let g = self.traj.grid().t;
        if base < g.lo() - 1e-12 || base + 3.0 > g.hi() + 1e-12 {
            return Err(Error::Domain(format!(
                "three annuli from {base} need [{base}, {}] inside [{}, {}]",
                base + 3.0,
                g.lo(),
                g.hi()
            )));
        }
        let annuli = [
            self.energies(base, base + 1.0, c0)?,
            self.energies(base + 1.0, base + 2.0, c0)?,
            self.energies(base + 2.0, base + 3.0, c0)?,
        ];
        let pick = |a: &AnnulusEnergies| match which {
            Which::E => a.e,
            Which::G => a.g,
        };
        let [x, y, z] = [pick(&annuli[0]), pick(&annuli[1]), pick(&annuli[2])];
        let ratios = [y / x, z / y];
        let mut condition = Vec::new();
        if which == Which::G {
            let scale = self.traj.v().max_abs().max(1.0);
            let mut ok = true;
            for sigma in [base, base + 1.5, base + 3.0] {
                let sigma = sigma.min(g.hi());
                let derived = am_linearized_condition(self.traj, sigma)?;
                let printed = extra_condition(self.traj, sigma)?;
                ok &= derived.abs() <= PRECONDITION_TOL * scale;
                condition.push(ConditionSample { sigma, printed, derived });
            }
            if !ok {
                return Ok(ThreeAnnuliReport {
                    base,
                    eta,
                    c0,
                    which,
                    annuli,
                    ratios,
                    verdict: Verdict::PreconditionViolated,
                    condition,
                });
            }
        }
        let verdict = if (x == 0.0 && y == 0.0) || y < (1.0 - eta) * x {
            Verdict::HypothesisFalse
        } else if z >= (1.0 + eta) * y {
            Verdict::ImplicationHolds
        } else {
            Verdict::Violation
        };
        Ok(ThreeAnnuliReport { base, eta, c0, which, annuli, ratios, verdict, condition })
    }

    /// `h(t) = Σ_{k≥2} ν_k⁴a_k² + a_k″²` and `h″(t)` at `t`. Sampled histories
    /// return `h″ = NaN`; use [`EnergyEvaluator::convexity`].
    fn h_and_second(&self, t: f64) -> (f64, f64) {
        match &self.history {
            History::Modal { modes, .. } => {
                let (mut h, mut hdd) = (0.0, 0.0);
                for (nu, ms) in modes.values() {
                    let d: Vec<f64> =
                        (0..5).map(|n| ms.iter().map(|m| mode_derivative(m, t, n)).sum()).collect();
                    let n4 = nu.powi(4);
                    h += n4 * d[0] * d[0] + d[2] * d[2];
                    hdd += n4 * 2.0 * (d[1] * d[1] + d[0] * d[2]) + 2.0 * (d[3] * d[3] + d[2] * d[4]);
                }
                (h, hdd)
            }
            History::Sampled { .. } => (self.integrands(t).0, f64::NAN),
        }
    }

    /// `min (h″ − ĉh)` over the t-nodes in `[t_a, t_b]`.
    pub fn convexity(&self, range: (f64, f64), c_hat: f64) -> Result<ConvexityReport> {
        let (ta, tb) = range;
        self.check_interval(ta, tb)?;
        let g = self.traj.grid().t;
        let nodes: Vec<usize> =
            (0..g.n()).filter(|&j| g.node(j) >= ta - 1e-12 && g.node(j) <= tb + 1e-12).collect();
        if nodes.is_empty() {
            return Err(Error::Domain("no t-nodes in the convexity range".into()));
        }
        let (h, hdd): (Vec<f64>, Vec<f64>) = match &self.history {
            History::Modal { .. } => nodes.iter().map(|&j| self.h_and_second(g.node(j))).unzip(),
            History::Sampled { .. } => {
                let all: Vec<f64> = (0..g.n()).map(|j| self.h_and_second(g.node(j)).0).collect();
                let d2 = FdStencil::new(g.n(), 2, DEFAULT_FD_ACCURACY)?.apply(&all, g.h());
                nodes.iter().map(|&j| (all[j], d2[j])).unzip()
            }
        };
        let mut margin = f64::INFINITY;
        let mut at = ta;
        for (i, &j) in nodes.iter().enumerate() {
            let m = hdd[i] - c_hat * h[i];
            if m < margin {
                margin = m;
                at = g.node(j);
            }
        }
        let hmax = h.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let relative_margin = if hmax > 0.0 { margin / hmax } else { 0.0 };
        Ok(ConvexityReport { c_hat, margin, at, relative_margin, source: self.source() })
    }

    /// Energies on `count` consecutive unit annuli from `base`.
    pub fn annulus_sequence(&self, base: f64, count: usize, c0: f64) -> Result<Vec<AnnulusEnergies>> {
        (0..count).map(|i| self.energies(base + i as f64, base + i as f64 + 1.0, c0)).collect()
    }
}

pub fn energies(
    traj: &LinearizedTrajectory,
    sp: &VentselSpectrum,
    sigma: f64,
    s: f64,
    c0: f64,
) -> Result<AnnulusEnergies> {
    EnergyEvaluator::new(traj, sp)?.energies(sigma, s, c0)
}

pub fn three_annuli_check(
    traj: &LinearizedTrajectory,
    sp: &VentselSpectrum,
    base: f64,
    eta: f64,
    c0: f64,
    which: Which,
) -> Result<ThreeAnnuliReport> {
    EnergyEvaluator::new(traj, sp)?.three_annuli(base, eta, c0, which)
}

pub fn convexity_check(
    traj: &LinearizedTrajectory,
    sp: &VentselSpectrum,
    range: (f64, f64),
    c_hat: f64,
) -> Result<ConvexityReport> {
    EnergyEvaluator::new(traj, sp)?.convexity(range, c_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::CylinderGrid;
    use crate::linearized::{modal_solution, slow_mode, synthesize_decaying, JordanPart, ModeSpec};

    fn setup() -> (VentselSpectrum, CylinderGrid) {
        (VentselSpectrum::on_grid(257, 8).unwrap(), CylinderGrid::log_polar(257, 0.0, 4.0, 201).unwrap())
    }

    #[test]
    fn zero_trajectory() {
        let (sp, g) = setup();
        let traj = slow_mode(0.0, 0.0, 0.0, g).unwrap();
        let e = energies(&traj, &sp, 0.0, 1.0, DEFAULT_C0).unwrap();
        assert_eq!((e.e, e.f, e.g), (0.0, 0.0, 0.0));
        let r = three_annuli_check(&traj, &sp, 0.0, DEFAULT_ETA, DEFAULT_C0, Which::E).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisFalse);
        let c = convexity_check(&traj, &sp, (0.0, 4.0), 1.0).unwrap();
        assert_eq!(c.margin, 0.0);
    }

    #[test]
    fn single_decaying_mode_closed_form() {
        let (sp, g) = setup();
        let sigma = 0.5;
        let nu = sp.nu(2);
        let mu = nu - 0.5;
        let traj = synthesize_decaying(&sp, &[(2, (mu * sigma).exp())], 0.0, g).unwrap();
        let e = energies(&traj, &sp, sigma, 2.0, DEFAULT_C0).unwrap();
        let want = (nu.powi(4) + mu.powi(4)) * (1.0 - (-2.0 * mu * 1.5).exp()) / (2.0 * mu);
        assert!((e.e - want).abs() < 1e-10 * want);
        assert_eq!(e.source, DerivativeSource::Analytic);
    }

    #[test]
    fn slow_mode_has_no_e_content() {
        let (sp, g) = setup();
        let traj = slow_mode(1.0, 0.0, 0.0, g).unwrap();
        let e = energies(&traj, &sp, 0.0, 1.0, DEFAULT_C0).unwrap();
        assert_eq!(e.e, 0.0);
        assert!(e.f > 0.0);
        let r = three_annuli_check(&traj, &sp, 0.0, DEFAULT_ETA, DEFAULT_C0, Which::G).unwrap();
        assert_eq!(r.verdict, Verdict::PreconditionViolated);
    }

    #[test]
    fn growth_and_decay_controls() {
        let (sp, g) = setup();
        let grow = modal_solution(&sp, &[ModeSpec { k: 2, c: 0.0, d: 1.0 }], JordanPart::default())
            .unwrap()
            .sample(g)
            .unwrap();
        let r = three_annuli_check(&grow, &sp, 0.0, DEFAULT_ETA, DEFAULT_C0, Which::E).unwrap();
        assert_eq!(r.verdict, Verdict::ImplicationHolds);
        let decay = synthesize_decaying(&sp, &[(2, 1.0)], 0.0, g).unwrap();
        let r = three_annuli_check(&decay, &sp, 0.0, DEFAULT_ETA, DEFAULT_C0, Which::E).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisFalse);
        let r = three_annuli_check(&decay, &sp, 0.0, DEFAULT_ETA, DEFAULT_C0, Which::G).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisFalse);
        assert!(three_annuli_check(&decay, &sp, 1.5, DEFAULT_ETA, DEFAULT_C0, Which::E).is_err());
    }

    #[test]
    fn sampled_path_agrees_with_analytic() {
        let (sp, g) = setup();
        let traj = synthesize_decaying(&sp, &[(2, 1.0), (3, -0.5)], 0.0, g).unwrap();
        let a = EnergyEvaluator::new(&traj, &sp).unwrap().energies(0.5, 1.5, DEFAULT_C0).unwrap();
        let s = EnergyEvaluator::sampled(&traj, &sp).unwrap().energies(0.5, 1.5, DEFAULT_C0).unwrap();
        assert_eq!(s.source, DerivativeSource::FiniteDifference);
        assert!((a.e - s.e).abs() < 1e-4 * a.e, "{} vs {}", a.e, s.e);
    }

    #[test]
    fn convexity_mixed_mode() {
        let (sp, g) = setup();
        let traj = modal_solution(&sp, &[ModeSpec { k: 2, c: 1.0, d: 0.01 }], JordanPart::default())
            .unwrap()
            .sample(g)
            .unwrap();
        let c = convexity_check(&traj, &sp, (0.0, 4.0), default_c_hat(&sp)).unwrap();
        assert!(c.margin >= 0.0, "{c:?}");
    }
}
