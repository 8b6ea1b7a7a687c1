//! Interface conditions at matrix/fracture boundaries.
//!
//! The matrix-side interface saturation `d` is the single local unknown; the
//! fracture-side value follows from the extended capillary pressure
//! condition, `S_f = h(d)`. For a frozen total flux `u` the residual
//!
//! ```text
//! R(d) = F_L(u, S_L, s_L(d)) + F_R(-u, S_R, s_R(d))
//! ```
//!
//! sums the two one-sided wetting fluxes into the interface. Each one-sided
//! flux uses its half-cell transmissibility and depth difference together
//! with its own region's curves. `R` is nonincreasing in `d`, so a bracketed
//! Newton iteration on `[0, 1]` always converges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{ihu_transport_flux, ppu_transport_flux, TransportFlux};
use crate::petrophysics::{extended_pc, CapillaryCurve, RegionKind, RockRegion};

/// Flux kernel used for the one-sided fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OneSidedKernel {
    Ppu,
    Ihu,
}

/// `(S_f, dS_f/dS_m)` from the extended capillary pressure condition.
pub fn h_map(s_m: f64, matrix: &CapillaryCurve, fracture: &CapillaryCurve) -> (f64, f64) {
    let (pc, dpc, _) = matrix.eval2(s_m);
    let clamped = extended_pc(matrix, s_m, fracture);
    let s_f = fracture.inverse(clamped).expect("clamped pressure lies in the fracture range");
    if pc <= fracture.min() || pc >= fracture.max() {
        return (s_f, 0.0);
    }
    let (_, dpc_f, _) = fracture.eval2(s_f);
    (s_f, dpc / dpc_f)
}

/// Check that the matrix curve's range strictly contains the fracture's.
pub fn validate_curves(matrix: &CapillaryCurve, fracture: &CapillaryCurve) -> Result<()> {
    if !(matrix.max() > fracture.max() && matrix.min() < fracture.min()) {
        return Err(Error::Config(format!(
            "matrix capillary range [{}, {}] must strictly contain the fracture range [{}, {}]",
            matrix.min(),
            matrix.max(),
            fracture.min(),
            fracture.max()
        )));
    }
    Ok(())
}

/// One side of the interface: the adjacent cell and its half-cell geometry.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceSide<'a> {
    pub region: &'a RockRegion,
    /// One-sided transmissibility.
    pub trans: f64,
    /// `z_cell - z_face`.
    pub dz: f64,
    pub saturation: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct InterfaceProblem<'a> {
    pub left: InterfaceSide<'a>,
    pub right: InterfaceSide<'a>,
    /// Total flux from left to right, frozen during the solve.
    pub u: f64,
    pub kernel: OneSidedKernel,
}

/// Derivatives of the matrix interface saturation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSensitivity {
    pub d_u: f64,
    pub d_s_left: f64,
    pub d_s_right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceSolveResult {
    pub s_matrix: f64,
    pub s_fracture: f64,
    /// Flux from the left cell into the interface, w.r.t. `(u, S_L, s_L)`.
    pub flux_left: TransportFlux,
    /// Flux from the right cell into the interface, w.r.t. `(-u, S_R, s_R)`.
    pub flux_right: TransportFlux,
    /// `ds_L/dd` and `ds_R/dd`.
    pub ds_left: f64,
    pub ds_right: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The residual kept one sign on `[0, 1]` and an endpoint was returned.
    pub clamped: bool,
}

impl InterfaceSolveResult {
    /// `∂R/∂d`.
    pub fn d_residual(&self) -> f64 {
        self.flux_left.d_sj * self.ds_left + self.flux_right.d_sj * self.ds_right
    }
}

struct Eval {
    r: f64,
    dr: f64,
    left: TransportFlux,
    right: TransportFlux,
    s_f: f64,
    ds_left: f64,
    ds_right: f64,
}

impl<'a> InterfaceProblem<'a> {
    fn matrix_on_left(&self) -> bool {
        self.left.region.kind() == RegionKind::Matrix
    }

    fn one_sided(&self, side: &InterfaceSide, u: f64, s_face: f64) -> TransportFlux {
        match self.kernel {
            OneSidedKernel::Ppu => {
                ppu_transport_flux(side.trans, side.dz, side.region, side.region, u, side.saturation, s_face)
            }
            OneSidedKernel::Ihu => ihu_transport_flux(side.trans, side.dz, side.region, u, side.saturation, s_face),
        }
    }

    fn eval(&self, d: f64) -> Eval {
        let (matrix, fracture) =
            if self.matrix_on_left() { (self.left.region, self.right.region) } else { (self.right.region, self.left.region) };
        let (s_f, dh) = h_map(d, matrix.capillary(), fracture.capillary());
        let (s_l, ds_l, s_r, ds_r) = if self.matrix_on_left() { (d, 1.0, s_f, dh) } else { (s_f, dh, d, 1.0) };
        let left = self.one_sided(&self.left, self.u, s_l);
        let right = self.one_sided(&self.right, -self.u, s_r);
        Eval {
            r: left.value + right.value,
            dr: left.d_sj * ds_l + right.d_sj * ds_r,
            left,
            right,
            s_f,
            ds_left: ds_l,
            ds_right: ds_r,
        }
    }

    /// Residual `R(d)` and `∂R/∂d`.
    pub fn residual(&self, d: f64) -> (f64, f64) {
        let e = self.eval(d);
        (e.r, e.dr)
    }
}

fn finish(e: Eval, d: f64, iterations: usize, converged: bool, clamped: bool) -> InterfaceSolveResult {
    InterfaceSolveResult {
        s_matrix: d,
        s_fracture: e.s_f,
        flux_left: e.left,
        flux_right: e.right,
        ds_left: e.ds_left,
        ds_right: e.ds_right,
        residual: e.r,
        iterations,
        converged,
        clamped,
    }
}

/// Solve `R(d) = 0` for the matrix interface saturation.
///
/// `tol` is an absolute residual tolerance in flux units. The iteration also
/// stops once the bracket or the Newton step shrinks below `1e-14`.
pub fn solve_interface(problem: &InterfaceProblem, tol: f64, max_iter: usize) -> Result<InterfaceSolveResult> {
    let e0 = problem.eval(0.0);
    let e1 = problem.eval(1.0);
    // R is nonincreasing: one sign on the whole interval means the endpoint
    // nearest to a root is the best available answer.
    if e0.r < -tol {
        return Ok(finish(e0, 0.0, 0, true, true));
    }
    if e1.r > tol {
        return Ok(finish(e1, 1.0, 0, true, true));
    }
    if e0.r.abs() <= tol {
        return Ok(finish(e0, 0.0, 0, true, false));
    }
    if e1.r.abs() <= tol {
        return Ok(finish(e1, 1.0, 0, true, false));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut d = 0.5 * (problem.left.saturation + problem.right.saturation);
    let mut last = f64::INFINITY;
    let mut width = hi - lo;
    for it in 1..=max_iter {
        let e = problem.eval(d);
        let floor = 16.0 * f64::EPSILON * (e.left.value.abs() + e.right.value.abs() + e.dr.abs());
        if e.r.abs() <= tol.max(floor) {
            return Ok(finish(e, d, it, true, false));
        }
        if e.r > 0.0 {
            lo = d;
        } else {
            hi = d;
        }
        // Newton near a kink can creep along one side of the bracket.
        let slow = hi - lo > 0.5 * width;
        width = hi - lo;
        let newton = if e.dr < 0.0 { d - e.r / e.dr } else { f64::NAN };
        let next = if !slow && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let step = (next - d).abs();
        if hi - lo <= 1e-14 || (step <= 1e-14 && last <= 1e-10) {
            let e = problem.eval(next);
            return Ok(finish(e, next, it, true, false));
        }
        last = step;
        d = next;
    }
    let e = problem.eval(d);
    Err(Error::InterfaceSolve { iterations: max_iter, residual: e.r })
}

/// Implicit-function derivatives of `d` w.r.t. the frozen total flux and
/// the two cell saturations.
pub fn interface_sensitivities(result: &InterfaceSolveResult) -> Result<InterfaceSensitivity> {
    if result.clamped {
        return Ok(InterfaceSensitivity::default());
    }
    let dr_dd = result.d_residual();
    let dr_du = result.flux_left.d_u - result.flux_right.d_u;
    let dr_dl = result.flux_left.d_si;
    let dr_dr = result.flux_right.d_si;
    let scale = dr_dl.abs() + dr_dr.abs();
    if dr_dd == 0.0 || dr_dd.abs() < 1e-14 * scale {
        return Err(Error::DegenerateDerivative(dr_dd));
    }
    Ok(InterfaceSensitivity { d_u: -dr_du / dr_dd, d_s_left: -dr_dl / dr_dd, d_s_right: -dr_dr / dr_dd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petrophysics::*;
    use approx::assert_relative_eq;

    fn regions() -> (RockRegion, RockRegion) {
        let fl = Fluids::new(1.0, 1.0, 1000.0, 800.0, 0.0).unwrap();
        let m = RockRegion::new(
            RegionKind::Matrix,
            RelPermCurve::quadratic(),
            RelPermCurve::quadratic(),
            CapillaryCurve::Matrix(fit_pc_bounds(3.0, 4.0, 15.0, -15.0).unwrap()),
            0.2,
            1.0,
            fl,
        )
        .unwrap();
        let f = RockRegion::new(
            RegionKind::Fracture,
            RelPermCurve::linear(),
            RelPermCurve::linear(),
            CapillaryCurve::Fracture(FractureCapillaryCurve::new(0.1).unwrap()),
            0.2,
            1e5,
            fl,
        )
        .unwrap();
        (m, f)
    }

    fn problem<'a>(m: &'a RockRegion, f: &'a RockRegion, u: f64, si: f64, sj: f64, k: OneSidedKernel) -> InterfaceProblem<'a> {
        InterfaceProblem {
            left: InterfaceSide { region: m, trans: 2.0, dz: 0.0, saturation: si },
            right: InterfaceSide { region: f, trans: 2e5, dz: 0.0, saturation: sj },
            u,
            kernel: k,
        }
    }

    #[test]
    fn h_map_branches() {
        let (m, f) = regions();
        assert_eq!(h_map(0.5, m.capillary(), f.capillary()).0, 1.0);
        assert_eq!(h_map(0.9, m.capillary(), f.capillary()), (1.0, 0.0));
        assert_eq!(h_map(1e-3, m.capillary(), f.capillary()), (0.0, 0.0));
        let s = m.capillary().inverse(0.05).unwrap();
        let (sf, dh) = h_map(s, m.capillary(), f.capillary());
        assert_relative_eq!(sf, 0.5, epsilon = 1e-10);
        assert!(dh > 0.0);
    }

    #[test]
    fn equilibrium_fixed_point() {
        let (m, f) = regions();
        for k in [OneSidedKernel::Ppu, OneSidedKernel::Ihu] {
            let r = solve_interface(&problem(&m, &f, 0.0, 0.5, 1.0, k), 1e-14, 50).unwrap();
            assert!(r.converged && !r.clamped);
            assert_relative_eq!(r.s_matrix, 0.5, epsilon = 1e-8);
            assert_eq!(r.s_fracture, 1.0);
            assert!(r.flux_left.value.abs() < 1e-12);
        }
    }

    #[test]
    fn imbibition_into_dry_matrix() {
        let (m, f) = regions();
        for k in [OneSidedKernel::Ppu, OneSidedKernel::Ihu] {
            let r = solve_interface(&problem(&m, &f, 0.0, 0.0, 1.0, k), 1e-13, 50).unwrap();
            assert!(r.flux_left.value < 0.0, "{k:?}: {r:?}");
            assert!(r.residual.abs() <= 1e-9 * r.flux_left.value.abs(), "{r:?}");
        }
    }

    #[test]
    fn matrix_on_the_right() {
        let (m, f) = regions();
        let p = InterfaceProblem {
            left: InterfaceSide { region: &f, trans: 2e5, dz: 0.0, saturation: 1.0 },
            right: InterfaceSide { region: &m, trans: 2.0, dz: 0.0, saturation: 0.1 },
            u: 0.0,
            kernel: OneSidedKernel::Ihu,
        };
        let r = solve_interface(&p, 1e-13, 50).unwrap();
        // wetting phase flows from the fracture (left) into the matrix
        assert!(r.flux_left.value > 0.0);
    }

    #[test]
    fn sensitivity_matches_resolve() {
        let (m, f) = regions();
        let base = problem(&m, &f, 0.0, 0.3, 0.98, OneSidedKernel::Ppu);
        let r = solve_interface(&base, 1e-15, 50).unwrap();
        let sens = interface_sensitivities(&r).unwrap();
        let h = 1e-6;
        let plus = solve_interface(&problem(&m, &f, 0.0, 0.3 + h, 0.98, OneSidedKernel::Ppu), 1e-15, 50).unwrap();
        let minus = solve_interface(&problem(&m, &f, 0.0, 0.3 - h, 0.98, OneSidedKernel::Ppu), 1e-15, 50).unwrap();
        let fd = (plus.s_matrix - minus.s_matrix) / (2.0 * h);
        assert_relative_eq!(sens.d_s_left, fd, max_relative = 1e-4);
    }
}
