//! Two-point interface fluxes.
//!
//! Two families of kernels live here:
//!
//! * pressure form: [`ppu_flux`] and [`ihu_flux`] take the cell pressures and
//!   saturations and return phase fluxes with derivatives w.r.t.
//!   `(p_i, p_j, S_i, S_j)`;
//! * transport form: [`ppu_transport_flux`] and [`ihu_transport_flux`] take a
//!   fixed total flux `u` and return the wetting flux with derivatives w.r.t.
//!   `(u, S_i, S_j)`. The interface-condition solver and the flux-surface
//!   tool use these.
//!
//! Fluxes are oriented from cell `i` to cell `j`.

use serde::{Deserialize, Serialize};

use crate::petrophysics::RockRegion;

/// Index of each primary variable in [`FluxValue::grad`].
pub const P_I: usize = 0;
pub const P_J: usize = 1;
pub const S_I: usize = 2;
pub const S_J: usize = 3;

/// A flux and its gradient w.r.t. `(p_i, p_j, S_i, S_j)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FluxValue {
    pub value: f64,
    pub grad: [f64; 4],
}

impl FluxValue {
    pub fn add(&self, other: &FluxValue) -> FluxValue {
        let mut grad = self.grad;
        for (g, o) in grad.iter_mut().zip(other.grad) {
            *g += o;
        }
        FluxValue { value: self.value + other.value, grad }
    }

    pub fn sub(&self, other: &FluxValue) -> FluxValue {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, k: f64) -> FluxValue {
        FluxValue { value: k * self.value, grad: self.grad.map(|g| k * g) }
    }
}

/// Cell whose mobility is used at the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Upwind {
    I,
    J,
}

/// Phase fluxes at one interface in pressure form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxEval {
    pub w: FluxValue,
    pub n: FluxValue,
    /// Upwinded mobilities actually used (PPU only; zero for IHU).
    pub mob_w: f64,
    pub mob_n: f64,
    /// `Pc_i(S_i) - Pc_j(S_j)`.
    pub delta_pc: f64,
    /// `(ρ_n - ρ_w) g Δz`.
    pub buoyancy_head: f64,
    pub trans: f64,
}

impl FluxEval {
    pub fn total(&self) -> FluxValue {
        self.w.add(&self.n)
    }
}

/// `ΔΦ_w` and `ΔΦ_n` for an interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePotentialDiff {
    pub w: f64,
    pub n: f64,
}

pub fn phase_potential_diff(
    dz: f64,
    region_i: &RockRegion,
    region_j: &RockRegion,
    p_i: f64,
    p_j: f64,
    s_i: f64,
    s_j: f64,
) -> PhasePotentialDiff {
    let fl = region_i.fluids();
    let dp = p_i - p_j;
    let dpc = region_i.pc(s_i).0 - region_j.pc(s_j).0;
    PhasePotentialDiff {
        w: dp - fl.rho_w * fl.gravity * dz - dpc,
        n: dp - fl.rho_n * fl.gravity * dz,
    }
}

/// Phase-potential upwinded flux `T λ_up ΔΦ` for both phases. Each cell's
/// capillary pressure comes from its own region curve.
pub fn ppu_flux(
    trans: f64,
    dz: f64,
    region_i: &RockRegion,
    region_j: &RockRegion,
    p_i: f64,
    p_j: f64,
    s_i: f64,
    s_j: f64,
) -> FluxEval {
    let fl = region_i.fluids();
    let (pc_i, dpc_i) = region_i.pc(s_i);
    let (pc_j, dpc_j) = region_j.pc(s_j);
    let dp = p_i - p_j;
    let dphi_w = dp - fl.rho_w * fl.gravity * dz - (pc_i - pc_j);
    let dphi_n = dp - fl.rho_n * fl.gravity * dz;
    let grad_w = [1.0, -1.0, -dpc_i, dpc_j];
    let grad_n = [1.0, -1.0, 0.0, 0.0];

    let phase = |dphi: f64, grad: [f64; 4], mob_i: (f64, f64), mob_j: (f64, f64)| {
        let (mob, dmob, slot) = if dphi >= 0.0 { (mob_i.0, mob_i.1, S_I) } else { (mob_j.0, mob_j.1, S_J) };
        let mut g = grad.map(|x| trans * mob * x);
        g[slot] += trans * dmob * dphi;
        (FluxValue { value: trans * mob * dphi, grad: g }, mob)
    };
    let (w, mob_w) = phase(dphi_w, grad_w, region_i.mobility_w(s_i), region_j.mobility_w(s_j));
    let (n, mob_n) = phase(dphi_n, grad_n, region_i.mobility_n(s_i), region_j.mobility_n(s_j));
    FluxEval {
        w,
        n,
        mob_w,
        mob_n,
        delta_pc: pc_i - pc_j,
        buoyancy_head: (fl.rho_n - fl.rho_w) * fl.gravity * dz,
        trans,
    }
}

/// Total flux used by every scheme: the sum of the two PPU phase fluxes.
pub fn total_velocity_ppu(
    trans: f64,
    dz: f64,
    region_i: &RockRegion,
    region_j: &RockRegion,
    p_i: f64,
    p_j: f64,
    s_i: f64,
    s_j: f64,
) -> FluxValue {
    ppu_flux(trans, dz, region_i, region_j, p_i, p_j, s_i, s_j).total()
}

/// Viscous, buoyancy and capillary parts of one phase flux.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FluxSplit {
    pub viscous: f64,
    pub buoyancy: f64,
    pub capillary: f64,
}

impl FluxSplit {
    pub fn sum(&self) -> f64 {
        self.viscous + self.buoyancy + self.capillary
    }
}

/// Fractional-flow split of an evaluated PPU flux, `(wetting, non-wetting)`.
pub fn ppu_fractional_decomposition(eval: &FluxEval) -> (FluxSplit, FluxSplit) {
    let (a, b) = (eval.mob_w, eval.mob_n);
    if a + b <= 0.0 {
        return (FluxSplit::default(), FluxSplit::default());
    }
    let u = eval.total().value;
    let coupling = eval.trans * a * b / (a + b);
    let w = FluxSplit {
        viscous: a / (a + b) * u,
        buoyancy: coupling * eval.buoyancy_head,
        capillary: -coupling * eval.delta_pc,
    };
    let n = FluxSplit {
        viscous: b / (a + b) * u,
        buoyancy: -coupling * eval.buoyancy_head,
        capillary: coupling * eval.delta_pc,
    };
    (w, n)
}

/// A wetting flux in transport form with derivatives w.r.t. `(u, S_i, S_j)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TransportFlux {
    pub value: f64,
    pub d_u: f64,
    pub d_si: f64,
    pub d_sj: f64,
}

impl TransportFlux {
    fn plus(self, o: TransportFlux) -> TransportFlux {
        TransportFlux {
            value: self.value + o.value,
            d_u: self.d_u + o.d_u,
            d_si: self.d_si + o.d_si,
            d_sj: self.d_sj + o.d_sj,
        }
    }

    /// Non-wetting counterpart `u - F_w`.
    pub fn complement(&self, u: f64) -> TransportFlux {
        TransportFlux { value: u - self.value, d_u: 1.0 - self.d_u, d_si: -self.d_si, d_sj: -self.d_sj }
    }

    /// Chain through `u(p_i, p_j, S_i, S_j)`.
    pub fn chain(&self, u: &FluxValue) -> FluxValue {
        let mut grad = u.grad.map(|g| self.d_u * g);
        grad[S_I] += self.d_si;
        grad[S_J] += self.d_sj;
        FluxValue { value: self.value, grad }
    }
}

/// Wetting and non-wetting parts of an IHU flux component.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhasePair {
    pub w: TransportFlux,
    pub n: TransportFlux,
}

/// PPU wetting flux written for a prescribed total flux `u`.
///
/// With `ω = ΔΦ_w - ΔΦ_n`, the total flux is a nondecreasing piecewise-linear
/// function of `ΔΦ_n` with kinks where either potential changes sign. The
/// segment containing `u` fixes both upwind directions, after which
/// `F_w = a/(a+b) u + T ab/(a+b) ω` with `a`, `b` the upwinded mobilities.
pub fn ppu_transport_flux(
    trans: f64,
    dz: f64,
    region_i: &RockRegion,
    region_j: &RockRegion,
    u: f64,
    s_i: f64,
    s_j: f64,
) -> TransportFlux {
    let fl = region_i.fluids();
    let (pc_i, dpc_i) = region_i.pc(s_i);
    let (pc_j, dpc_j) = region_j.pc(s_j);
    let omega = (fl.rho_n - fl.rho_w) * fl.gravity * dz - (pc_i - pc_j);
    let (lw_i, lw_j) = (region_i.mobility_w(s_i), region_j.mobility_w(s_j));
    let (ln_i, ln_j) = (region_i.mobility_n(s_i), region_j.mobility_n(s_j));

    let up = |x: f64| if x >= 0.0 { Upwind::I } else { Upwind::J };
    let pick = |side: Upwind, i: (f64, f64), j: (f64, f64)| if side == Upwind::I { i } else { j };
    let total_at = |x: f64| {
        let a = pick(up(x + omega), lw_i, lw_j).0;
        let b = pick(up(x), ln_i, ln_j).0;
        trans * (a * (x + omega) + b * x)
    };
    let (b_lo, b_hi) = if omega >= 0.0 { (-omega, 0.0) } else { (0.0, -omega) };
    let (side_w, side_n) = if u >= total_at(b_hi) {
        (Upwind::I, Upwind::I)
    } else if u >= total_at(b_lo) {
        if omega > 0.0 {
            (Upwind::I, Upwind::J)
        } else {
            (Upwind::J, Upwind::I)
        }
    } else {
        (Upwind::J, Upwind::J)
    };
    let (a, da) = pick(side_w, lw_i, lw_j);
    let (b, db) = pick(side_n, ln_i, ln_j);
    let sum = a + b;
    if sum <= 0.0 {
        return TransportFlux::default();
    }
    let value = a / sum * u + trans * a * b / sum * omega;
    let d_omega = trans * a * b / sum;
    let d_a = (u * b + trans * omega * b * b) / (sum * sum);
    let d_b = (-u * a + trans * omega * a * a) / (sum * sum);
    let mut d_si = -d_omega * dpc_i;
    let mut d_sj = d_omega * dpc_j;
    match side_w {
        Upwind::I => d_si += d_a * da,
        Upwind::J => d_sj += d_a * da,
    }
    match side_n {
        Upwind::I => d_si += d_b * db,
        Upwind::J => d_sj += d_b * db,
    }
    TransportFlux { value, d_u: a / sum, d_si, d_sj }
}

/// Viscous part `λ_ℓ/λ_T · u`, both phases upwinded by the sign of `u`.
pub fn ihu_viscous(u: f64, region_i: &RockRegion, region_j: &RockRegion, s_i: f64, s_j: f64) -> PhasePair {
    let (region, s, side) = if u >= 0.0 { (region_i, s_i, Upwind::I) } else { (region_j, s_j, Upwind::J) };
    let (lw, dlw) = region.mobility_w(s);
    let (ln, dln) = region.mobility_n(s);
    let lt = lw + ln;
    assert!(lt > 0.0, "total mobility vanishes at S = {s}");
    let frac = lw / lt;
    let dfrac = (dlw * ln - lw * dln) / (lt * lt);
    let mut w = TransportFlux { value: frac * u, d_u: frac, d_si: 0.0, d_sj: 0.0 };
    match side {
        Upwind::I => w.d_si = dfrac * u,
        Upwind::J => w.d_sj = dfrac * u,
    }
    PhasePair { w, n: w.complement(u) }
}

/// Buoyancy part with each phase upwinded by the sign of its own density
/// contrast term.
pub fn ihu_gravity(
    trans: f64,
    dz: f64,
    region_i: &RockRegion,
    region_j: &RockRegion,
    s_i: f64,
    s_j: f64,
) -> PhasePair {
    let fl = region_i.fluids();
    let head_w = (fl.rho_n - fl.rho_w) * fl.gravity * dz;
    if head_w == 0.0 {
        return PhasePair::default();
    }
    // head_n = -head_w
    let (side_w, side_n) = if head_w > 0.0 { (Upwind::I, Upwind::J) } else { (Upwind::J, Upwind::I) };
    let (a, da) = if side_w == Upwind::I { region_i.mobility_w(s_i) } else { region_j.mobility_w(s_j) };
    let (b, db) = if side_n == Upwind::I { region_i.mobility_n(s_i) } else { region_j.mobility_n(s_j) };
    let sum = a + b;
    if sum <= 0.0 {
        return PhasePair::default();
    }
    let value = trans * a * b / sum * head_w;
    let d_a = trans * head_w * b * b / (sum * sum);
    let d_b = trans * head_w * a * a / (sum * sum);
    let mut w = TransportFlux { value, ..Default::default() };
    match side_w {
        Upwind::I => w.d_si += d_a * da,
        Upwind::J => w.d_sj += d_a * da,
    }
    match side_n {
        Upwind::I => w.d_si += d_b * db,
        Upwind::J => w.d_sj += d_b * db,
    }
    let n = TransportFlux { value: -w.value, d_u: 0.0, d_si: -w.d_si, d_sj: -w.d_sj };
    PhasePair { w, n }
}

/// Capillary part `T D_ij (S_i - S_j)` with `D_ij` the maximum of the
/// region's diffusion coefficient between the two saturations.
pub fn ihu_capillary(trans: f64, region: &RockRegion, s_i: f64, s_j: f64) -> PhasePair {
    let (lo, hi, i_is_lo) = if s_i <= s_j { (s_i, s_j, true) } else { (s_j, s_i, false) };
    let m = region.diffusion_max_on_interval(lo, hi);
    let (dd_si, dd_sj) = if i_is_lo { (m.d_lo, m.d_hi) } else { (m.d_hi, m.d_lo) };
    let ds = s_i - s_j;
    let w = TransportFlux {
        value: trans * m.value * ds,
        d_u: 0.0,
        d_si: trans * (m.value + dd_si * ds),
        d_sj: trans * (-m.value + dd_sj * ds),
    };
    let n = TransportFlux { value: -w.value, d_u: 0.0, d_si: -w.d_si, d_sj: -w.d_sj };
    PhasePair { w, n }
}

/// IHU wetting flux `V + G + C` for a prescribed total flux. Both cells must
/// lie in the same region.
pub fn ihu_transport_flux(trans: f64, dz: f64, region: &RockRegion, u: f64, s_i: f64, s_j: f64) -> TransportFlux {
    ihu_viscous(u, region, region, s_i, s_j)
        .w
        .plus(ihu_gravity(trans, dz, region, region, s_i, s_j).w)
        .plus(ihu_capillary(trans, region, s_i, s_j).w)
}

/// IHU flux in pressure form: the total flux comes from PPU, the wetting flux
/// from the split viscous/buoyancy/capillary kernels and `F_n = u - F_w`.
pub fn ihu_flux(trans: f64, dz: f64, region: &RockRegion, p_i: f64, p_j: f64, s_i: f64, s_j: f64) -> (FluxValue, FluxValue) {
    let u = total_velocity_ppu(trans, dz, region, region, p_i, p_j, s_i, s_j);
    let w = ihu_transport_flux(trans, dz, region, u.value, s_i, s_j).chain(&u);
    let n = u.sub(&w);
    (w, n)
}
