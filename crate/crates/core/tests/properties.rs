mod common;

use common::*;
use fracflow::analysis::{error_norms, RecoverySeries};
use fracflow::flux::*;
use fracflow::interface::*;
use fracflow::petrophysics::*;
use fracflow::solver::Well;
use fracflow::units::*;
use fracflow::{CapillaryCurve, RegionKind, RelPermCurve, RockRegion, Scheme};
use proptest::prelude::*;

const T: f64 = 1e-13;

fn relperm() -> impl Strategy<Value = RelPermCurve> {
    prop_oneof![Just(RelPermCurve::quadratic()), Just(RelPermCurve::cubic())]
}

fn sat() -> impl Strategy<Value = f64> {
    0.0..=1.0_f64
}

fn inner_sat() -> impl Strategy<Value = f64> {
    0.02..0.98_f64
}

fn matrix_curve(region: &RockRegion) -> MatrixCapillaryCurve {
    match region.capillary() {
        CapillaryCurve::Matrix(c) => *c,
        _ => unreachable!(),
    }
}

// ---------------------------------------------------------------- monotonicity

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// PPU at fixed pressures: F_w grows with the left saturation and
    /// shrinks with the right one.
    #[test]
    fn ppu_flux_is_monotone(kr in relperm(), s_i in sat(), s_j in sat(), dp in -2e4..2e4_f64, dz in -1.0..1.0_f64, ds in 1e-6..0.05_f64) {
        let m = matrix(kr, GRAVITY);
        let f = |a: f64, b: f64| ppu_flux(T, dz, &m, &m, dp, 0.0, a, b).w.value;
        let base = f(s_i, s_j);
        let tol = 1e-12 * base.abs().max(T * m.d_max());
        prop_assert!(f((s_i + ds).min(1.0), s_j) >= base - tol);
        prop_assert!(f(s_i, (s_j + ds).min(1.0)) <= base + tol);
    }

    /// Same-region faces of an assembled model with PPU phase fluxes.
    #[test]
    fn face_flux_is_monotone(scheme_idx in 0..2usize, s_i in sat(), s_j in sat(), dp in -2e4..2e4_f64, ds in 1e-6..0.05_f64) {
        let model = two_matrix_cells(Scheme::ALL[scheme_idx]);
        let f = |a: f64, b: f64| model.face_flux(&gauge_state(&[dp, 0.0], &[a, b]), 0, 1e-30).unwrap().0.value;
        let base = f(s_i, s_j);
        let tol = 1e-12 * base.abs().max(T * model.matrix.d_max());
        prop_assert!(f((s_i + ds).min(1.0), s_j) >= base - tol);
        prop_assert!(f(s_i, (s_j + ds).min(1.0)) <= base + tol);
    }

    /// IHU at fixed total flux.
    #[test]
    fn ihu_flux_is_monotone(kr in relperm(), s_i in sat(), s_j in sat(), u in -1e-9..1e-9_f64, dz in -1.0..1.0_f64, ds in 1e-6..0.05_f64) {
        let m = matrix(kr, GRAVITY);
        let f = |a: f64, b: f64| ihu_transport_flux(T, dz, &m, u, a, b).value;
        let base = f(s_i, s_j);
        let tol = 1e-12 * base.abs().max(T * m.d_max());
        prop_assert!(f((s_i + ds).min(1.0), s_j) >= base - tol);
        prop_assert!(f(s_i, (s_j + ds).min(1.0)) <= base + tol);
    }

    /// Region-boundary flux at fixed total flux, both one-sided kernels.
    #[test]
    fn interface_flux_is_monotone(s_i in sat(), s_j in sat(), u in -1e-9..1e-9_f64, ds in 1e-6..0.05_f64, ihu in any::<bool>()) {
        let (m, fr) = (matrix(RelPermCurve::quadratic(), 0.0), fracture(0.0));
        let kernel = if ihu { OneSidedKernel::Ihu } else { OneSidedKernel::Ppu };
        let f = |a: f64, b: f64| {
            let p = interface_problem(&m, &fr, u, a, b, kernel);
            solve_interface(&p, 1e-22, 200).unwrap().flux_left.value
        };
        let base = f(s_i, s_j);
        let tol = 1e-9 * base.abs().max(1e-16);
        prop_assert!(f((s_i + ds).min(1.0), s_j) >= base - tol);
        prop_assert!(f(s_i, (s_j + ds).min(1.0)) <= base + tol);
    }
}

fn two_matrix_cells(scheme: Scheme) -> fracflow::Model {
    let seg = fracflow::grid::Segment {
        region: RegionKind::Matrix,
        length: 2.0,
        cells: 2,
        permeability: MILLIDARCY,
        porosity: 0.2,
        pv_multiplier: 1.0,
    };
    let grid = fracflow::grid::Grid1D::from_segments(&[seg], 1.0, 25.0).unwrap();
    fracflow::Model::new(grid, matrix(RelPermCurve::cubic(), GRAVITY), fracture(GRAVITY), vec![], scheme).unwrap()
}

// ----------------------------------------------------------- derivatives

struct Fd {
    coarse: f64,
    fine: f64,
    forward: f64,
    backward: f64,
}

/// Central quotients at `h` and `h/10`, plus one-sided ones at `h`.
fn central<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> Fd {
    let (fp, f0, fm) = (f(x + h), f(x), f(x - h));
    let fine = (f(x + h / 10.0) - f(x - h / 10.0)) / (h / 5.0);
    Fd { coarse: (fp - fm) / (2.0 * h), fine, forward: (fp - f0) / h, backward: (f0 - fm) / h }
}

/// Agreement at `rel` relative to `max(|analytic|, |fd|, floor)`, where
/// `floor` is the magnitude below which differences are roundoff. A stencil
/// that straddles an upwind switch or patch join shows up as disagreement
/// between the one-sided quotients or between the two step sizes; such
/// samples are rejected.
fn check_derivative(analytic: f64, fd: Fd, floor: f64, rel: f64) -> Result<(), TestCaseError> {
    let scale = fd.coarse.abs().max(floor);
    let kinked = (fd.forward - fd.backward).abs() > 1e-3 * scale || (fd.coarse - fd.fine).abs() > 0.5 * rel * scale;
    prop_assume!(!kinked, "stencil crosses a switch");
    prop_assert!(
        (analytic - fd.coarse).abs() <= rel * analytic.abs().max(scale),
        "analytic {analytic:e} vs fd {:e}",
        fd.coarse
    );
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn petrophysics_derivatives_match(kr in relperm(), s in inner_sat()) {
        let m = matrix(kr, GRAVITY);
        let h = 1e-6;
        let mobility = 1e-3 / CENTIPOISE;
        check_derivative(m.mobility_w(s).1, central(|x| m.mobility_w(x).0, s, h), mobility, 1e-6)?;
        check_derivative(m.mobility_n(s).1, central(|x| m.mobility_n(x).0, s, h), mobility, 1e-6)?;
        check_derivative(m.pc(s).1, central(|x| m.pc(x).0, s, h), PSI, 1e-6)?;
        check_derivative(m.pc2(s).2, central(|x| m.pc(x).1, s, h), PSI, 1e-6)?;
        let d = |x: f64| m.capillary_diffusion(x).unwrap();
        check_derivative(d(s).1, central(|x| d(x).0, s, h), 1e-3 * m.d_max(), 1e-6)?;
    }

    #[test]
    fn ppu_flux_gradient_matches(kr in relperm(), s_i in inner_sat(), s_j in inner_sat(), p_i in -2e4..2e4_f64, dz in -1.0..1.0_f64) {
        let m = matrix(kr, GRAVITY);
        let f = |x: [f64; 4]| ppu_flux(T, dz, &m, &m, x[0], x[1], x[2], x[3]);
        let x = [p_i, 0.0, s_i, s_j];
        let e = f(x);
        for k in 0..4 {
            let h = if k < 2 { 1e-2 } else { 1e-7 };
            let bump = |v: f64| { let mut y = x; y[k] = v; y };
            let floor = 1e-3 * T * if k < 2 { 1.0 / CENTIPOISE } else { m.d_max() };
            check_derivative(e.w.grad[k], central(|v| f(bump(v)).w.value, x[k], h), floor, 1e-6)?;
            check_derivative(e.n.grad[k], central(|v| f(bump(v)).n.value, x[k], h), floor, 1e-6)?;
        }
    }

    #[test]
    fn ihu_flux_gradient_matches(kr in relperm(), s_i in inner_sat(), s_j in inner_sat(), p_i in -2e4..2e4_f64, dz in -1.0..1.0_f64) {
        let m = matrix(kr, GRAVITY);
        let f = |x: [f64; 4]| ihu_flux(T, dz, &m, x[0], x[1], x[2], x[3]);
        let x = [p_i, 0.0, s_i, s_j];
        let (w, n) = f(x);
        for k in 0..4 {
            let h = if k < 2 { 1e-2 } else { 1e-7 };
            let bump = |v: f64| { let mut y = x; y[k] = v; y };
            let floor = 1e-3 * T * if k < 2 { 1.0 / CENTIPOISE } else { m.d_max() };
            check_derivative(w.grad[k], central(|v| f(bump(v)).0.value, x[k], h), floor, 1e-6)?;
            check_derivative(n.grad[k], central(|v| f(bump(v)).1.value, x[k], h), floor, 1e-6)?;
        }
    }

    #[test]
    fn transport_flux_gradients_match(kr in relperm(), s_i in inner_sat(), s_j in inner_sat(), u in -1e-9..1e-9_f64, dz in -1.0..1.0_f64) {
        let m = matrix(kr, GRAVITY);
        let kernels: [&dyn Fn(f64, f64, f64) -> TransportFlux; 2] = [
            &|u, a, b| ppu_transport_flux(T, dz, &m, &m, u, a, b),
            &|u, a, b| ihu_transport_flux(T, dz, &m, u, a, b),
        ];
        for f in kernels {
            let e = f(u, s_i, s_j);
            let floor = 1e-3 * T * m.d_max();
            check_derivative(e.d_u, central(|v| f(v, s_i, s_j).value, u, (0.1 * u.abs()).max(1e-11)), 1e-6, 1e-6)?;
            check_derivative(e.d_si, central(|v| f(u, v, s_j).value, s_i, 1e-7), floor, 1e-6)?;
            check_derivative(e.d_sj, central(|v| f(u, s_i, v).value, s_j, 1e-7), floor, 1e-6)?;
        }
    }

    /// The solve returns `d` to a few ulp, so the saturation sensitivities
    /// are compared relative to the norm of the pair.
    #[test]
    fn interface_sensitivities_match(s_m in inner_sat(), s_f in inner_sat(), u in -1e-9..1e-9_f64, ihu in any::<bool>()) {
        let (m, fr) = (matrix(RelPermCurve::quadratic(), 0.0), fracture(0.0));
        let kernel = if ihu { OneSidedKernel::Ihu } else { OneSidedKernel::Ppu };
        let solve = |u: f64, a: f64, b: f64| solve_interface(&interface_problem(&m, &fr, u, a, b, kernel), 1e-24, 200).unwrap();
        let r = solve(u, s_m, s_f);
        prop_assume!(!r.clamped);
        let sens = match interface_sensitivities(&r) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        let norm = sens.d_s_left.abs() + sens.d_s_right.abs();
        prop_assume!(norm > 0.0);
        check_derivative(sens.d_s_left, central(|v| solve(u, v, s_f).s_matrix, s_m, 1e-6), norm, 1e-6)?;
        check_derivative(sens.d_s_right, central(|v| solve(u, s_m, v).s_matrix, s_f, 1e-6), norm, 1e-6)?;
        // u = 0 flips the one-sided upwind directions
        prop_assume!(u.abs() > 2e-10);
        // the step is capped by |u|, so allow for a few dozen ulp of noise in d
        let h = 1e-10;
        let noise = 64.0 * f64::EPSILON * r.s_matrix / h;
        let rel = 1e-6_f64.max(noise / sens.d_u.abs());
        check_derivative(sens.d_u, central(|v| solve(v, s_m, s_f).s_matrix, u, h), 1e-3 * sens.d_u.abs(), rel)?;
    }
}

// ------------------------------------------------------------- IHU bound

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn ihu_capillary_flux_is_bounded(kr in relperm(), s_i in sat(), s_j in sat()) {
        let m = matrix(kr, 0.0);
        let c = ihu_capillary(T, &m, s_i, s_j);
        prop_assert!(c.w.value.abs() <= T * m.d_max() * (1.0 + 1e-12));
        prop_assert!(c.w.value.abs() <= T * m.d_max() * (s_i - s_j).abs() * (1.0 + 1e-12));
        prop_assert_eq!(c.w.value, -c.n.value);
    }
}

// -------------------------------------------------------- interface solve

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn interface_solve_matches_bisection(s_m in sat(), s_f in sat(), u in -1e-10..1e-10_f64, ihu in any::<bool>(), s_matrix_left in any::<bool>()) {
        let (m, fr) = (matrix(RelPermCurve::quadratic(), GRAVITY), fracture(GRAVITY));
        let kernel = if ihu { OneSidedKernel::Ihu } else { OneSidedKernel::Ppu };
        let mut p = interface_problem(&m, &fr, u, s_m, s_f, kernel);
        if !s_matrix_left {
            std::mem::swap(&mut p.left, &mut p.right);
        }
        let scale = p.left.trans.min(p.right.trans) * m.d_max();
        let r = solve_interface(&p, 1e-12 * scale, 200).unwrap();
        // R is nonincreasing in d
        let grid: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
        for w in grid.windows(2) {
            prop_assert!(p.residual(w[1]).0 <= p.residual(w[0]).0 + 1e-12 * scale);
        }
        match bisection_oracle(&p) {
            Some(d) if !r.clamped => {
                prop_assert!(r.residual.abs() < 1e-9 * scale, "residual {:e}", r.residual);
                // a flat stretch of R would make the root non-unique
                let flat = (p.residual((d - 1e-8).max(0.0)).0 - p.residual((d + 1e-8).min(1.0)).0).abs() == 0.0;
                prop_assert!(flat || (r.s_matrix - d).abs() < 1e-8, "{} vs {}", r.s_matrix, d);
            }
            None => prop_assert!(r.clamped),
            _ => {}
        }
    }
}

#[test]
fn interface_solve_matches_dense_scan() {
    let (m, fr) = (matrix(RelPermCurve::quadratic(), 0.0), fracture(0.0));
    for (s_m, s_f, u, kernel) in [
        (0.0, 1.0, 0.0, OneSidedKernel::Ppu),
        (0.0, 1.0, 0.0, OneSidedKernel::Ihu),
        (0.3, 0.8, 2e-11, OneSidedKernel::Ppu),
        (0.7, 0.95, -3e-11, OneSidedKernel::Ihu),
    ] {
        let p = interface_problem(&m, &fr, u, s_m, s_f, kernel);
        let r = solve_interface(&p, 1e-25, 200).unwrap();
        let n = 1_000_000;
        let best = (0..=n)
            .map(|k| k as f64 / n as f64)
            .min_by(|a, b| p.residual(*a).0.abs().total_cmp(&p.residual(*b).0.abs()))
            .unwrap();
        assert!((best - r.s_matrix).abs() <= 1e-6 + 1e-8, "{kernel:?}: scan {best} vs solve {}", r.s_matrix);
        // the scan brackets the root to one grid spacing
        let lo = (r.s_matrix * n as f64).floor() / n as f64;
        let hi = (lo + 1.0 / n as f64).min(1.0);
        assert!(p.residual(lo).0 >= -1e-30 && p.residual(hi).0 <= 1e-30 || r.clamped);
    }
}

// ------------------------------------------------------- mass conservation

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn steps_conserve_mass(
        s in proptest::collection::vec(0.0..=1.0_f64, 6),
        rate in 0.0..1e-8_f64,
        scheme_idx in 0..3usize,
        dt in 1e2..1e5_f64,
    ) {
        let scheme = Scheme::ALL[scheme_idx];
        let wells = vec![Well::RateInjector { cell: 0, rate }, Well::PressureProducer { cell: 5, bhp: 0.0, well_index: 1e-10 }];
        let mut model = mixed_model(scheme, wells);
        model.newton.tol = 1e-14;
        model.newton.max_newton = 60;
        let old = gauge_state(&[0.0; 6], &s);
        let out = match model.newton(&old, old.clone(), dt, 0.0) {
            Ok(o) => o,
            Err(_) => return Ok(()),
        };
        let src = model.apply_wells(&out.state);
        let pv: Vec<f64> = model.grid.cells.iter().map(|c| c.pore_volume).collect();
        let acc: f64 = (0..6).map(|c| pv[c] * (out.state.s[c] - s[c])).sum();
        let q_w: f64 = src.iter().map(|t| t.w.value).sum::<f64>() * dt;
        let q_n: f64 = src.iter().map(|t| t.n.value).sum::<f64>() * dt;
        // forming sum(PV dS) and the converged residuals leave this much behind
        let floor = (model.newton.tol + 64.0 * f64::EPSILON) * pv.iter().sum::<f64>();
        let scale = q_w.abs().max(q_n.abs()).max(acc.abs());
        prop_assert!((acc - q_w).abs() <= 1e-10 * scale + floor, "wetting {acc:e} vs {q_w:e}");
        prop_assert!((-acc - q_n).abs() <= 1e-10 * scale + floor, "non-wetting {:e} vs {q_n:e}", -acc);
    }
}

// ---------------------------------------------------------- diffusion max

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn diffusion_max_matches_brute_force(kr in relperm(), a in sat(), b in sat()) {
        let m = matrix(kr, 0.0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let fast = m.diffusion_max_on_interval(lo, hi).value;
        let slow = brute_max(&m, lo, hi);
        prop_assert!((fast - slow).abs() <= 1e-8 * m.d_max(), "{fast:e} vs {slow:e}");
        prop_assert!(fast >= slow * (1.0 - 1e-12));
    }
}

// -------------------------------------------------------- curve continuity

#[test]
fn capillary_curve_is_c2_at_patch_joins() {
    for (pe, theta, max, min) in [(3.0, 4.0, 15.0, -15.0), (1.0, 2.0, 10.0, -5.0), (5.0, 3.0, 40.0, -20.0)] {
        let c = fit_pc_bounds(pe * PSI, theta, max * PSI, min * PSI).unwrap();
        let curve = CapillaryCurve::Matrix(c);
        assert!((curve.max() - max * PSI).abs() <= 1e-9 * PSI);
        assert!((curve.min() - min * PSI).abs() <= 1e-9 * PSI);
        for join in [c.left_patch().switch, c.right_patch().switch] {
            let h = 1e-9;
            let below = c.eval2(join - h);
            let above = c.eval2(join + h);
            let scale = [below.0.abs(), below.1.abs(), below.2.abs()];
            assert!((below.0 - above.0).abs() <= 1e-5 * scale[0].max(PSI), "value jump at {join}");
            assert!((below.1 - above.1).abs() <= 1e-5 * scale[1], "slope jump at {join}");
            assert!((below.2 - above.2).abs() <= 1e-5 * scale[2], "curvature jump at {join}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bounded_curve_is_monotone(s in 0.0..1.0_f64, ds in 1e-9..1e-2_f64) {
        let m = matrix(RelPermCurve::quadratic(), 0.0);
        let c = matrix_curve(&m);
        prop_assert!(c.eval2((s + ds).min(1.0)).0 <= c.eval2(s).0);
        prop_assert!(c.eval2(s).1 < 0.0);
    }
}

// ------------------------------------------------------------ error norms

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn e2_bounds_every_e1(
        a in proptest::collection::vec(0.0..100.0_f64, 2..40),
        b in proptest::collection::vec(0.0..100.0_f64, 2..40),
    ) {
        let series = |mut r: Vec<f64>| {
            r.sort_by(f64::total_cmp);
            let n = r.len();
            RecoverySeries { t_d: (0..n).map(|k| k as f64 / (n - 1) as f64).collect(), recovery: r }
        };
        let (x, y) = (series(a), series(b));
        let e = error_norms(&x, &y);
        prop_assert!(e.e1.iter().all(|&v| v >= 0.0 && v <= e.e2));
        prop_assert!(e.e1.iter().any(|&v| v == e.e2));
    }
}

#[test]
fn recovery_is_monotone_in_converged_runs() {
    for scheme in Scheme::ALL {
        for n in [1, 3] {
            let mut cfg = fracflow::config::ScenarioConfig::spontaneous();
            cfg.scheme = scheme.as_str().into();
            cfg.n_matrix = n;
            let out = fracflow::scenarios::spontaneous_imbibition(&cfg).unwrap();
            let r = out.recovery.unwrap();
            for w in r.recovery.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "{scheme} N={n}: {} then {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn extended_pc_stays_in_fracture_range() {
    let (m, f) = (matrix(RelPermCurve::quadratic(), 0.0), fracture(0.0));
    for k in 0..=1000 {
        let s = k as f64 / 1000.0;
        let v = extended_pc(m.capillary(), s, f.capillary());
        assert!(v >= f.capillary().min() && v <= f.capillary().max());
        let (s_f, _) = h_map(s, m.capillary(), f.capillary());
        assert!((0.0..=1.0).contains(&s_f));
    }
    assert_eq!(m.kind(), RegionKind::Matrix);
}
