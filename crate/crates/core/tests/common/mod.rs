#![allow(dead_code)]

use fracflow::grid::{Grid1D, Segment};
use fracflow::petrophysics::*;
use fracflow::units::*;
use fracflow::{Model, RegionKind, Scheme, State};

pub fn fluids(gravity: f64) -> Fluids {
    Fluids::new(CENTIPOISE, CENTIPOISE, 1000.0, 800.0, gravity).unwrap()
}

pub fn matrix(relperm: RelPermCurve, gravity: f64) -> RockRegion {
    RockRegion::new(
        RegionKind::Matrix,
        relperm,
        relperm,
        CapillaryCurve::Matrix(fit_pc_bounds(3.0 * PSI, 4.0, 15.0 * PSI, -15.0 * PSI).unwrap()),
        0.2,
        MILLIDARCY,
        fluids(gravity),
    )
    .unwrap()
}

pub fn fracture(gravity: f64) -> RockRegion {
    RockRegion::new(
        RegionKind::Fracture,
        RelPermCurve::linear(),
        RelPermCurve::linear(),
        CapillaryCurve::Fracture(FractureCapillaryCurve::new(0.1 * PSI).unwrap()),
        0.2,
        1e5 * MILLIDARCY,
        fluids(gravity),
    )
    .unwrap()
}

/// Three matrix cells next to three fracture cells, tilted so that gravity
/// enters every face.
pub fn mixed_grid(tilt_deg: f64) -> Grid1D {
    let seg = |region, permeability, cells| Segment { region, length: 3.0, cells, permeability, porosity: 0.2, pv_multiplier: 1.0 };
    Grid1D::from_segments(
        &[seg(RegionKind::Matrix, MILLIDARCY, 3), seg(RegionKind::Fracture, 1e5 * MILLIDARCY, 3)],
        1.0,
        tilt_deg,
    )
    .unwrap()
}

pub fn mixed_model(scheme: Scheme, wells: Vec<fracflow::solver::Well>) -> Model {
    let mut m = Model::new(mixed_grid(10.0), matrix(RelPermCurve::quadratic(), GRAVITY), fracture(GRAVITY), wells, scheme).unwrap();
    m.newton.interface_tol = 1e-16;
    m
}

pub fn gauge_state(p: &[f64], s: &[f64]) -> State {
    State { p: p.to_vec(), s: s.to_vec() }
}

pub fn interface_problem<'a>(
    m: &'a RockRegion,
    f: &'a RockRegion,
    u: f64,
    s_m: f64,
    s_f: f64,
    kernel: fracflow::interface::OneSidedKernel,
) -> fracflow::interface::InterfaceProblem<'a> {
    use fracflow::interface::{InterfaceProblem, InterfaceSide};
    InterfaceProblem {
        left: InterfaceSide { region: m, trans: 2.0 * MILLIDARCY, dz: 0.0, saturation: s_m },
        right: InterfaceSide { region: f, trans: 2e5 * MILLIDARCY, dz: 0.0, saturation: s_f },
        u,
        kernel,
    }
}

/// Sign change of `R` found by plain bisection, no derivatives.
pub fn bisection_oracle(p: &fracflow::interface::InterfaceProblem) -> Option<f64> {
    let r = |d: f64| p.residual(d).0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if r(lo) < 0.0 || r(hi) > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if r(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Max of `D` on `[lo, hi]` by dense sampling and a second pass around the
/// best sample.
pub fn brute_max(region: &RockRegion, lo: f64, hi: f64) -> f64 {
    let d = |s: f64| region.capillary_diffusion(s).unwrap().0;
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let (mut best_s, mut best) = (lo, d(lo));
    for k in 1..=n {
        let s = lo + k as f64 * h;
        let v = d(s);
        if v > best {
            best = v;
            best_s = s;
        }
    }
    let (a, b) = ((best_s - h).max(lo), (best_s + h).min(hi));
    for k in 0..=n {
        best = best.max(d(a + (b - a) * k as f64 / n as f64));
    }
    best
}
