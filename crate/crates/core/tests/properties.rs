//! Property tests for the module invariants.

use std::f64::consts::PI;
use std::sync::OnceLock;

use cracktip::annuli::{EnergyEvaluator, Which, DEFAULT_C0, DEFAULT_ETA};
use cracktip::cylinder::CylinderGrid;
use cracktip::expansion::{expand, reconstruct_sampled, ModeCoefficients};
use cracktip::fields::{
    disk_energy, fd_gradient, grad_polar, rescale, to_log_polar, CrackParametrization, CrackTipField, Isq,
    PolarField, PolarPoint, Rad,
};
use cracktip::identities::{
    boundary_variation_report, dlms, max_bulk_integrand, random_conformal, random_polynomial, QuadratureSpec,
};
use cracktip::linearized::{
    decay_rate, lineare_residual, modal_solution, synthesize_decaying, ventsel_residual, JordanPart, ModeSpec,
};
use cracktip::nonlinear::{curvature, sis_residual, NonlinearState};
use cracktip::numerics::{
    differentiate, find_root, integrate, Grid1D, Parity, RootBracket, SampledFunction1D,
};
use cracktip::ventsel::{phi_positive, psi, resolvent, zeta0, zeta1, BilinearFormContext, VentselSpectrum};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spectrum() -> &'static VentselSpectrum {
    static SP: OnceLock<VentselSpectrum> = OnceLock::new();
    SP.get_or_init(|| VentselSpectrum::on_grid(2049, 12).unwrap())
}

fn small_cylinder() -> CylinderGrid {
    CylinderGrid::log_polar(257, 0.0, 3.0, 201).unwrap()
}

fn odd_from(ctx: &BilinearFormContext, c: &[f64]) -> SampledFunction1D {
    ctx.sample(Parity::Odd, |p| {
        let x = p - PI;
        c.iter().enumerate().map(|(j, cj)| cj * (0.5 * (j + 1) as f64 * x).sin()).sum()
    })
    .unwrap()
}

fn h3_norm(ctx: &BilinearFormContext, u: &SampledFunction1D) -> f64 {
    ctx.sobolev_norm(u, 3).unwrap()
}

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

// numerics ------------------------------------------------------------------

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn integration_is_linear(a in -5.0..5.0f64, b in -5.0..5.0f64, w in 0.1..4.0f64) {
        let g = Grid1D::angular(513).unwrap();
        let f = SampledFunction1D::from_fn(g, Parity::None, |x| (w * x).sin() + x * x).unwrap();
        let h = SampledFunction1D::from_fn(g, Parity::None, |x| (0.3 * x).exp()).unwrap();
        let lhs = integrate(&f.combine(a, &h, b).unwrap());
        let rhs = a * integrate(&f) + b * integrate(&h);
        let scale = integrate(&f).abs().max(integrate(&h).abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (a.abs() + b.abs()) * scale);
    }

    #[test]
    fn odd_samples_integrate_to_zero(c in prop::collection::vec(-1.0..1.0f64, 1..6)) {
        let ctx = &spectrum().context();
        let f = odd_from(ctx, &c);
        prop_assert!(integrate(&f).abs() <= 1e-12);
    }

    #[test]
    fn twice_first_derivative_matches_second(w in 0.2..2.0f64, s in -1.0..1.0f64) {
        let mut err = Vec::new();
        for n in [257, 513] {
            let g = Grid1D::angular(n).unwrap();
            let f = SampledFunction1D::from_fn(g, Parity::None, |x| (w * x + s).sin()).unwrap();
            let d11 = differentiate(&differentiate(&f, 1).unwrap(), 1).unwrap();
            let d2 = differentiate(&f, 2).unwrap();
            err.push(d11.sub(&d2).unwrap().max_abs());
        }
        prop_assert!(err[0] < 1e-3);
        // At least second-order decay on refinement.
        prop_assert!(err[1] <= err[0] / 3.0 || err[1] < 1e-10);
    }

    #[test]
    fn root_bracket_respects_tolerance(c in 0.1..10.0f64, tol_exp in 4..13i32) {
        let tol = 10f64.powi(-tol_exp);
        let x = find_root(|x| x * x - c, RootBracket::new(0.0, c.max(1.0) + 1.0).unwrap(), tol).unwrap();
        prop_assert!((x - c.sqrt()).abs() <= tol);
    }
}

// fields --------------------------------------------------------------------

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn conjugate_gradient_is_perpendicular(r in 0.01..1.0f64, phi in 0.0..2.0 * PI) {
        let p = PolarPoint::new(r, phi).unwrap();
        let gr = grad_polar(CrackTipField::Rad, p).perp();
        let gi = grad_polar(CrackTipField::Isq, p);
        prop_assert!((gr.d_r - gi.d_r).abs() <= 1e-10 && (gr.d_phi_over_r - gi.d_phi_over_r).abs() <= 1e-10);
    }

    #[test]
    fn model_fields_are_harmonic(r in 0.05..0.9f64, phi in 0.2..6.0f64) {
        let h = 1e-3;
        for u in [CrackTipField::Rad, CrackTipField::Isq] {
            let f = |p: f64, s: f64| u.value(p, s);
            let fpp = (f(phi + h, r) - 2.0 * f(phi, r) + f(phi - h, r)) / (h * h);
            let hr = h * r;
            let rfr = |s: f64| s * (f(phi, s + 0.5 * hr) - f(phi, s - 0.5 * hr)) / hr;
            let radial = (rfr(r + 0.5 * hr) - rfr(r - 0.5 * hr)) / hr;
            let lap = fpp / (r * r) + radial / r;
            prop_assert!(lap.abs() <= 1e-4 / r.powf(1.5), "laplacian {} at r={}", lap, r);
        }
    }

    #[test]
    fn traces_at_the_crack(r in 0.01..1.0f64) {
        let e = 1e-9;
        for phi in [e, 2.0 * PI - e] {
            prop_assert!(Rad.gradient(phi, r).d_phi_over_r.abs() < 1e-8 / r.sqrt());
            prop_assert!(Isq.value(phi, r).abs() < 1e-8);
        }
    }

    #[test]
    fn bonnet_ratio_is_constant(r in 0.05..1.0f64) {
        prop_assert!((disk_energy(&Rad, r).unwrap() / r - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn rescaling_is_a_semigroup(r1 in 0.05..0.25f64, r2 in 0.05..0.25f64, eps in -0.5..0.5f64,
                                s in 0.1..1.0f64, phi in 0.1..6.0f64) {
        let a = CrackParametrization::linear(eps);
        // After one rescaling the crack sits at angle 0, so the second uses the flat chart.
        let flat = CrackParametrization::constant(0.0);
        let twice = rescale(rescale(Rad, &a, r1).unwrap(), &flat, r2).unwrap();
        let once = rescale(Rad, &a, r1 * r2).unwrap();
        prop_assert!((twice.value(phi, s) - once.value(phi, s)).abs() <= 1e-12);
    }

    #[test]
    fn log_polar_isq_is_stationary(t0 in 0.1..2.0f64) {
        let g = CylinderGrid::log_polar(33, t0, t0 + 2.0, 17).unwrap();
        let st = to_log_polar(&Isq, &CrackParametrization::constant(0.0), g).unwrap();
        for j in 1..g.t.n() {
            for i in 0..g.phi.n() {
                prop_assert!((st.f.at(i, j) - st.f.at(i, 0)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn fd_gradient_agrees_with_analytic(r in 0.05..1.0f64, phi in 0.1..6.1f64) {
        let a = Rad.gradient(phi, r);
        let b = fd_gradient(&Rad, phi, r);
        prop_assert!((a.d_r - b.d_r).abs() < 1e-6 / r && (a.d_phi_over_r - b.d_phi_over_r).abs() < 1e-6 / r);
    }
}

// spectrum ------------------------------------------------------------------

proptest! {
    #![proptest_config(cfg(20))]

    #[test]
    fn resolvent_is_self_adjoint(c in prop::collection::vec(-1.0..1.0f64, 8), d in prop::collection::vec(-1.0..1.0f64, 8)) {
        let ctx = spectrum().context();
        let (v, w) = (odd_from(ctx, &c), odd_from(ctx, &d));
        let lhs = ctx.bilinear(&resolvent(&v, ctx).unwrap(), &w).unwrap();
        let rhs = ctx.bilinear(&v, &resolvent(&w, ctx).unwrap()).unwrap();
        let scale = ctx.h1_norm(&v).unwrap() * ctx.h1_norm(&w).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-7 * scale);
    }

    #[test]
    fn resolvent_gains_two_derivatives(c in prop::collection::vec(-1.0..1.0f64, 8)) {
        // One constant across all inputs: the worst of 3000 draws is about 15.
        let ctx = spectrum().context();
        let g = odd_from(ctx, &c);
        let ratio = h3_norm(ctx, &resolvent(&g, ctx).unwrap()) / ctx.h1_norm(&g).unwrap();
        prop_assert!(ratio <= 30.0, "ratio {}", ratio);
    }

    #[test]
    fn sharp_poincare_inequality(c in prop::collection::vec(-1.0..1.0f64, 1..8)) {
        // Odd combinations of cos((j + ½)φ); equality only along ζ₁ (j = 0).
        let ctx = spectrum().context();
        let v = ctx.sample(Parity::Odd, |p| {
            c.iter().enumerate().map(|(j, cj)| cj * ((j as f64 + 0.5) * p).cos()).sum()
        }).unwrap();
        let l2 = ctx.l2(&v, &v).unwrap();
        let d = ctx.derivative(&v, 1).unwrap();
        let dd = ctx.l2(&d, &d).unwrap();
        let excess: f64 = c.iter().enumerate().skip(1).map(|(j, cj)| cj * cj * ((j as f64 + 0.5).powi(2) - 0.25)).sum::<f64>() * PI;
        prop_assert!(dd - 0.25 * l2 >= -1e-8);
        prop_assert!((dd - 0.25 * l2 - excess).abs() <= 1e-6 * (1.0 + excess));
    }

    #[test]
    fn no_positive_exponent_roots(x in 1e-3..50.0f64) {
        prop_assert!(phi_positive(x) > 0.0);
    }
}

#[test]
fn psi_changes_sign_on_every_bracket() {
    for k in 3..=50 {
        assert!(psi((k - 1) as f64 * PI) * psi(k as f64 * PI) < 0.0, "k = {k}");
    }
}

#[test]
fn jordan_block_structure() {
    let ctx = spectrum().context();
    let z0 = ctx.sample(Parity::Odd, zeta0).unwrap();
    let z1 = ctx.sample(Parity::Odd, zeta1).unwrap();
    let l1 = ctx.derivative(&z1, 2).unwrap().combine(1.0, &z1, 0.25).unwrap();
    let l0 = ctx.derivative(&z0, 2).unwrap().combine(1.0, &z0, 0.25).unwrap().sub(&z1).unwrap();
    assert!(l1.max_abs() < 1e-8, "(d² + ¼)ζ₁ = {}", l1.max_abs());
    assert!(l0.max_abs() < 1e-8, "(d² + ¼)ζ₀ − ζ₁ = {}", l0.max_abs());
}

// expansion -----------------------------------------------------------------

proptest! {
    #![proptest_config(cfg(20))]

    #[test]
    fn norm_equivalence_has_one_constant(a0 in -1.0..1.0f64, a1 in -1.0..1.0f64,
                                         a in prop::collection::vec(-1.0..1.0f64, 11)) {
        let sp = spectrum();
        let c = ModeCoefficients::new(a0, a1, a).unwrap();
        let f = reconstruct_sampled(sp, &c).unwrap();
        let sum: f64 = (0..=12).map(|k| c.get(k).powi(2)).sum();
        let ratio = sp.context().h1_norm(&f).unwrap().powi(2) / sum;
        // The measured range over many draws is about [0.5, 3.5].
        prop_assert!(ratio > 0.1 && ratio < 10.0, "ratio {}", ratio);
    }

    #[test]
    fn expansion_round_trip(a0 in -1.0..1.0f64, a1 in -1.0..1.0f64, a in prop::collection::vec(-1.0..1.0f64, 11)) {
        let sp = spectrum();
        let c = ModeCoefficients::new(a0, a1, a).unwrap();
        let back = expand(sp, &reconstruct_sampled(sp, &c).unwrap(), 12).unwrap();
        prop_assert!(back.max_abs_diff(&c) <= 1e-9);
    }
}

#[test]
fn basis_profiles_have_comparable_norms() {
    let sp = VentselSpectrum::on_grid(2049, 50).unwrap();
    let ctx = sp.context();
    let worst = (2..=50).map(|k| ctx.h1_norm(&sp.mode(k).profile).unwrap().powi(2)).fold(0.0, f64::max);
    assert!(worst < 2.0, "max ‖ζ_k‖²_H¹ = {worst}");
}

#[test]
fn zeta0_has_no_component_on_the_eigenmodes() {
    let sp = spectrum();
    let c = expand(sp, &sp.mode(0).profile, 12).unwrap();
    assert!((c.a0 - 1.0).abs() < 1e-9);
    assert!(c.a1.abs() < 1e-9);
    assert!(c.a.iter().all(|x| x.abs() < 1e-9), "{:?}", c.a);
}

// linearized system ---------------------------------------------------------

proptest! {
    #![proptest_config(cfg(8))]

    #[test]
    fn residual_forms_are_equivalent(k in 2usize..6, c in 0.2..2.0f64, b in -1.0..1.0f64) {
        let sp = spectrum();
        let sol = modal_solution(sp, &[ModeSpec { k, c, d: 0.0 }], JordanPart { b1: b, ..JordanPart::default() }).unwrap();
        let traj = sol.sample(small_cylinder()).unwrap();
        let lin = lineare_residual(&traj).unwrap().norms().max();
        let ven = ventsel_residual(&traj).unwrap().norms().max();
        prop_assert!(lin <= 1e-4 && ven <= 1e-4);
        prop_assert!(lin.max(ven) <= 10.0 * lin.min(ven));
    }

    #[test]
    fn modes_evolve_independently(c2 in -1.0..1.0f64, c3 in -1.0..1.0f64, d4 in -0.1..0.1f64, t in 0.0..3.0f64) {
        let sp = spectrum();
        let modes = [ModeSpec { k: 2, c: c2, d: 0.0 }, ModeSpec { k: 3, c: c3, d: 0.0 }, ModeSpec { k: 4, c: 0.0, d: d4 }];
        let sol = modal_solution(sp, &modes, JordanPart::default()).unwrap();
        let zeta = sp.context().sample(Parity::Odd, |p| sol.zeta(p, t)).unwrap();
        let got = expand(sp, &zeta, 12).unwrap();
        let scale = sol.modes.iter().map(|m| m.eval(t)[0].abs()).fold(0.0, f64::max);
        for m in &sol.modes {
            prop_assert!((got.get(m.k) - m.eval(t)[0]).abs() <= 1e-8 * (1.0 + scale));
        }
    }

    #[test]
    fn decaying_solutions_respect_the_spectral_gap(c in prop::collection::vec(0.05..1.0f64, 4)) {
        // Faster modes still bend the log-measure on any finite window; by t = 6
        // their share is below 0.5% of the fitted slope.
        let sp = spectrum();
        let coeffs: Vec<(usize, f64)> = c.iter().enumerate().map(|(i, &x)| (i + 2, x)).collect();
        let grid = CylinderGrid::log_polar(129, 0.0, 9.0, 451).unwrap();
        let traj = synthesize_decaying(sp, &coeffs, 0.0, grid).unwrap();
        let mu2 = sp.nu(2) - 0.5;
        prop_assert!(decay_rate(&traj, (6.0, 9.0)).unwrap() <= -mu2 * (1.0 - 5e-3));
    }
}

// annuli --------------------------------------------------------------------

proptest! {
    #![proptest_config(cfg(16))]

    #[test]
    fn random_genuine_solutions_never_violate(seed in any::<u64>()) {
        let sp = spectrum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = CylinderGrid::log_polar(129, 0.0, 3.0, 121).unwrap();
        for _ in 0..10 {
            let traj = cracktip::linearized::random_genuine_solution(sp, &mut rng, 10).unwrap().sample(grid).unwrap();
            let v = EnergyEvaluator::new(&traj, sp).unwrap().three_annuli(0.0, DEFAULT_ETA, DEFAULT_C0, Which::E).unwrap();
            prop_assert_ne!(v.verdict, cracktip::annuli::Verdict::Violation);
        }
    }

    #[test]
    fn g_is_quadratic(scale in 0.1..10.0f64, c in 0.1..1.0f64) {
        let sp = spectrum();
        let grid = CylinderGrid::log_polar(129, 0.0, 3.0, 121).unwrap();
        let m = |s: f64| modal_solution(sp, &[ModeSpec { k: 2, c: s * c, d: 0.0 }, ModeSpec { k: 3, c: 0.0, d: s * 0.1 }],
            JordanPart::default()).unwrap().sample(grid).unwrap();
        let (a, b) = (m(1.0), m(scale));
        let ga = EnergyEvaluator::new(&a, sp).unwrap().energies(0.5, 1.5, DEFAULT_C0).unwrap();
        let gb = EnergyEvaluator::new(&b, sp).unwrap().energies(0.5, 1.5, DEFAULT_C0).unwrap();
        prop_assert!((gb.g - scale * scale * ga.g).abs() <= 1e-10 * gb.g.abs());
    }

    #[test]
    fn decaying_g_certifies_geometric_decay(c in prop::collection::vec(-1.0..1.0f64, 5)) {
        let sp = spectrum();
        let grid = CylinderGrid::log_polar(129, 0.0, 5.0, 201).unwrap();
        let modes: Vec<ModeSpec> = c.iter().enumerate().map(|(i, &x)| ModeSpec { k: i + 2, c: x, d: 0.0 }).collect();
        let traj = modal_solution(sp, &modes, JordanPart::default()).unwrap().sample(grid).unwrap();
        let ev = EnergyEvaluator::new(&traj, sp).unwrap();
        let seq = ev.annulus_sequence(0.0, 5, DEFAULT_C0).unwrap();
        for w in seq.windows(2) {
            prop_assert!(w[1].g <= (1.0 - DEFAULT_ETA) * w[0].g);
        }
    }
}

// identities ----------------------------------------------------------------

proptest! {
    #![proptest_config(cfg(10))]

    #[test]
    fn conformal_fields_have_no_bulk(seed in any::<u64>(), r in 0.2..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = random_conformal(&mut rng, 4);
        let b = max_bulk_integrand(&Rad, &CrackParametrization::constant(0.0), r, &eta, QuadratureSpec::default()).unwrap();
        prop_assert!(b <= 1e-10);
    }

    #[test]
    fn non_conformal_identity_within_estimate(seed in any::<u64>(), r in 0.2..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = random_polynomial(&mut rng, 3);
        let rep = boundary_variation_report(&Rad, &CrackParametrization::constant(0.0), r, &eta).unwrap();
        prop_assert!(rep.residual.abs() <= 10.0 * rep.error_estimate);
    }

    #[test]
    fn dlms_is_scale_covariant(rho in 0.05..0.25f64) {
        let crack = CrackParametrization::constant(0.0);
        let small = dlms(&Rad, &crack, rho).unwrap();
        let unit = dlms(&rescale(Rad, &crack, rho).unwrap(), &crack.rescaled(rho), 1.0).unwrap();
        prop_assert!((small.lhs - unit.lhs).abs() <= 1e-10 && (small.rhs - unit.rhs).abs() <= 1e-10);
    }
}

// nonlinear -----------------------------------------------------------------

proptest! {
    #![proptest_config(cfg(20))]

    #[test]
    fn curvature_of_spirals_is_closed_form(eps in -0.1..0.1f64, t in 0.0..5.0f64) {
        let k = curvature(eps, 0.0, t);
        let exact = t.exp() * (eps + eps.powi(3)) / (1.0 + eps * eps).powf(1.5);
        prop_assert!((k - exact).abs() <= 1e-12 * exact.abs().max(1.0));
    }

    #[test]
    fn odd_v_has_matching_endpoint_slopes(c in prop::collection::vec(-1.0..1.0f64, 6)) {
        let g = Grid1D::angular(513).unwrap();
        let v = SampledFunction1D::from_fn(g, Parity::Odd, |p| {
            let x = p - PI;
            c.iter().enumerate().map(|(j, cj)| cj * ((j + 1) as f64 * 0.5 * x).sin()).sum()
        }).unwrap();
        let d = differentiate(&v, 1).unwrap();
        prop_assert!((d.first() - d.last()).abs() <= 1e-9);
    }
}

#[test]
fn isq_state_residual_shrinks_with_the_grid() {
    let mut pde = Vec::new();
    for n in [129, 257] {
        let g = CylinderGrid::log_polar(n, 0.0, 1.0, 33).unwrap();
        let f = cracktip::cylinder::CylinderField::from_fn(g, |p, _| (0.5 * p).sin() * (2.0 / PI).sqrt());
        let st = NonlinearState::new(f, cracktip::linearized::TimeSeries::zeros(g.t)).unwrap();
        pde.push(sis_residual(&st).unwrap().norms().pde);
    }
    assert!(pde[0] < 1e-6);
    assert!(pde[1] <= pde[0] / 8.0, "{pde:?}");
}
