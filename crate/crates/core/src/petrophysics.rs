//! Saturation functions for one rock region.
//!
//! All functions take the wetting-phase saturation `S` as argument. The
//! non-wetting relative permeability is evaluated at `1 - S`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SCAN_POINTS: usize = 10_000;
const FIT_BRACKET_EPS: f64 = 1e-6;

fn check_saturation(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::SaturationDomain(s))
    }
}

/// Power-law relative permeability `kr(S) = S^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelPermCurve {
    exponent: u32,
}

impl RelPermCurve {
    pub fn new(exponent: u32) -> Result<Self> {
        if exponent == 0 {
            return Err(Error::Config("relative permeability exponent must be >= 1".into()));
        }
        Ok(Self { exponent })
    }

    pub fn linear() -> Self {
        Self { exponent: 1 }
    }

    pub fn quadratic() -> Self {
        Self { exponent: 2 }
    }

    pub fn cubic() -> Self {
        Self { exponent: 3 }
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    /// `(kr, dkr/dS)`, rejecting saturations outside `[0, 1]`.
    pub fn eval(&self, s: f64) -> Result<(f64, f64)> {
        check_saturation(s)?;
        Ok(self.eval_unchecked(s))
    }

    pub(crate) fn eval_unchecked(&self, s: f64) -> (f64, f64) {
        let n = self.exponent as i32;
        let kr = s.powi(n);
        let dkr = if n == 1 { 1.0 } else { n as f64 * s.powi(n - 1) };
        (kr, dkr)
    }
}

/// Quadratic end patch `a x^2 + b x + bound`, where `x = S` on the left end
/// and `x = 1 - S` on the right end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPatch {
    pub a: f64,
    pub b: f64,
    /// Saturation where the patch hands over to the analytic curve.
    pub switch: f64,
}

/// Skjaeveland-type matrix curve `pe (S^{-1/θ} - (1-S)^{-1/θ})`, bounded near
/// both endpoints by C² quadratic patches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixCapillaryCurve {
    entry_pressure: f64,
    theta: f64,
    pc_max: f64,
    pc_min: f64,
    left: QuadraticPatch,
    right: QuadraticPatch,
}

/// Value, first, second and third derivative of the unbounded curve.
fn skjaeveland(pe: f64, theta: f64, s: f64) -> [f64; 4] {
    let m = 1.0 / theta;
    let u = 1.0 - s;
    let v = pe * (s.powf(-m) - u.powf(-m));
    let d1 = -pe * m * (s.powf(-m - 1.0) + u.powf(-m - 1.0));
    let d2 = pe * m * (m + 1.0) * (s.powf(-m - 2.0) - u.powf(-m - 2.0));
    let d3 = -pe * m * (m + 1.0) * (m + 2.0) * (s.powf(-m - 3.0) + u.powf(-m - 3.0));
    [v, d1, d2, d3]
}

/// Root of a strictly monotone scalar function on `[lo, hi]` by bisection
/// with Newton steps accepted whenever they stay inside the bracket.
fn bracketed_newton<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (f_lo, _) = f(lo);
    let (f_hi, _) = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    let lo_positive = f_lo > 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx.abs() <= tol {
            return Some(x);
        }
        if (fx > 0.0) == lo_positive {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1e-300) {
            return Some(x);
        }
        let newton = x - fx / dfx;
        x = if dfx != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Some(x)
}

/// Fit the two quadratic end patches so that the bounded curve is C² and hits
/// `pc_max` at `S = 0` and `pc_min` at `S = 1`.
pub fn fit_pc_bounds(pe: f64, theta: f64, pc_max: f64, pc_min: f64) -> Result<MatrixCapillaryCurve> {
    if !(pe > 0.0) {
        return Err(Error::Config(format!("entry pressure must be positive, got {pe}")));
    }
    if !(theta > 1.0) {
        return Err(Error::Config(format!("theta must exceed 1, got {theta}")));
    }
    if !(pc_min < 0.0 && 0.0 < pc_max) {
        return Err(Error::Config(format!(
            "capillary bounds must satisfy pc_min < 0 < pc_max, got [{pc_min}, {pc_max}]"
        )));
    }
    let lo = FIT_BRACKET_EPS;
    let hi = 0.5 - FIT_BRACKET_EPS;
    let scale = pc_max.abs().max(pc_min.abs());

    // Left patch: with a = Pc''/2 and b = Pc' - Pc'' s the value condition
    // reduces to g(s) = Pc - s Pc' + s^2 Pc''/2 - pc_max = 0, g' = s^2 Pc'''/2.
    let left_residual = |s: f64| {
        let [v, d1, d2, d3] = skjaeveland(pe, theta, s);
        (v - s * d1 + 0.5 * s * s * d2 - pc_max, 0.5 * s * s * d3)
    };
    let s_minus = bracketed_newton(left_residual, lo, hi, 1e-14 * scale).ok_or_else(|| {
        Error::Config(format!("no left switch saturation in ({lo}, {hi}) for pc_max = {pc_max}"))
    })?;
    let [_, d1, d2, _] = skjaeveland(pe, theta, s_minus);
    let left = QuadraticPatch { a: 0.5 * d2, b: d1 - d2 * s_minus, switch: s_minus };

    // Right patch in x = 1 - S, with Q(x) = Pc(1 - x).
    let right_residual = |x: f64| {
        let [v, d1, d2, d3] = skjaeveland(pe, theta, 1.0 - x);
        let (q, q1, q2, q3) = (v, -d1, d2, -d3);
        (q - x * q1 + 0.5 * x * x * q2 - pc_min, 0.5 * x * x * q3)
    };
    let x_plus = bracketed_newton(right_residual, lo, hi, 1e-14 * scale).ok_or_else(|| {
        Error::Config(format!("no right switch saturation in ({lo}, {hi}) for pc_min = {pc_min}"))
    })?;
    let [_, d1, d2, _] = skjaeveland(pe, theta, 1.0 - x_plus);
    let (q1, q2) = (-d1, d2);
    let right = QuadraticPatch { a: 0.5 * q2, b: q1 - q2 * x_plus, switch: 1.0 - x_plus };

    Ok(MatrixCapillaryCurve { entry_pressure: pe, theta, pc_max, pc_min, left, right })
}

impl MatrixCapillaryCurve {
    pub fn entry_pressure(&self) -> f64 {
        self.entry_pressure
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn left_patch(&self) -> QuadraticPatch {
        self.left
    }

    pub fn right_patch(&self) -> QuadraticPatch {
        self.right
    }

    /// The unbounded analytic curve, for comparisons.
    pub fn unbounded(&self, s: f64) -> (f64, f64) {
        let [v, d1, _, _] = skjaeveland(self.entry_pressure, self.theta, s);
        (v, d1)
    }

    /// `(Pc, dPc/dS, d2Pc/dS2)` of the bounded curve.
    pub fn eval2(&self, s: f64) -> (f64, f64, f64) {
        if s <= self.left.switch {
            let QuadraticPatch { a, b, .. } = self.left;
            (a * s * s + b * s + self.pc_max, 2.0 * a * s + b, 2.0 * a)
        } else if s >= self.right.switch {
            let QuadraticPatch { a, b, .. } = self.right;
            let x = 1.0 - s;
            (a * x * x + b * x + self.pc_min, -(2.0 * a * x + b), 2.0 * a)
        } else {
            let [v, d1, d2, _] = skjaeveland(self.entry_pressure, self.theta, s);
            (v, d1, d2)
        }
    }
}

/// Linear fracture curve `p_max (1 - S)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractureCapillaryCurve {
    p_max: f64,
}

impl FractureCapillaryCurve {
    pub fn new(p_max: f64) -> Result<Self> {
        if !(p_max > 0.0) {
            return Err(Error::Config(format!("fracture p_max must be positive, got {p_max}")));
        }
        Ok(Self { p_max })
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CapillaryCurve {
    Matrix(MatrixCapillaryCurve),
    Fracture(FractureCapillaryCurve),
}

impl CapillaryCurve {
    /// `(Pc, dPc/dS)`.
    pub fn eval(&self, s: f64) -> Result<(f64, f64)> {
        check_saturation(s)?;
        let (v, d1, _) = self.eval2(s);
        Ok((v, d1))
    }

    pub(crate) fn eval2(&self, s: f64) -> (f64, f64, f64) {
        match self {
            CapillaryCurve::Matrix(m) => m.eval2(s),
            CapillaryCurve::Fracture(f) => (f.p_max * (1.0 - s), -f.p_max, 0.0),
        }
    }

    pub(crate) fn value(&self, s: f64) -> f64 {
        self.eval2(s).0
    }

    /// Value at `S = 0`.
    pub fn max(&self) -> f64 {
        match self {
            CapillaryCurve::Matrix(m) => m.pc_max,
            CapillaryCurve::Fracture(f) => f.p_max,
        }
    }

    /// Value at `S = 1`.
    pub fn min(&self) -> f64 {
        match self {
            CapillaryCurve::Matrix(m) => m.pc_min,
            CapillaryCurve::Fracture(_) => 0.0,
        }
    }

    /// Saturation with `Pc(S) = target`.
    pub fn inverse(&self, target: f64) -> Result<f64> {
        let (min, max) = (self.min(), self.max());
        let slack = 1e-12 * max.abs().max(min.abs());
        if !(target >= min - slack && target <= max + slack) {
            return Err(Error::PressureRange { target, min, max });
        }
        let target = target.clamp(min, max);
        match self {
            CapillaryCurve::Fracture(f) => Ok((1.0 - target / f.p_max).clamp(0.0, 1.0)),
            CapillaryCurve::Matrix(m) => {
                let tol = 1e-12 * target.abs().max(1.0);
                let f = |s: f64| {
                    let (v, d1, _) = m.eval2(s);
                    (v - target, d1)
                };
                Ok(bracketed_newton(f, 0.0, 1.0, tol).expect("monotone curve brackets every target"))
            }
        }
    }
}

/// Clamp of this region's capillary pressure into the other region's range.
pub fn extended_pc(this: &CapillaryCurve, s: f64, other: &CapillaryCurve) -> f64 {
    let pc = this.value(s);
    other.max().min(pc.max(other.min()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Matrix,
    Fracture,
}

impl RegionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionKind::Matrix => "matrix",
            RegionKind::Fracture => "fracture",
        }
    }
}

/// Phase viscosities [Pa s], densities [kg/m3] and gravity [m/s2].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fluids {
    pub mu_w: f64,
    pub mu_n: f64,
    pub rho_w: f64,
    pub rho_n: f64,
    pub gravity: f64,
}

impl Fluids {
    pub fn new(mu_w: f64, mu_n: f64, rho_w: f64, rho_n: f64, gravity: f64) -> Result<Self> {
        if !(mu_w > 0.0 && mu_n > 0.0) {
            return Err(Error::Config("viscosities must be positive".into()));
        }
        Ok(Self { mu_w, mu_n, rho_w, rho_n, gravity })
    }
}

/// Result of [`RockRegion::diffusion_max_on_interval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalMax {
    pub value: f64,
    pub d_lo: f64,
    pub d_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RockRegion {
    kind: RegionKind,
    relperm_w: RelPermCurve,
    relperm_n: RelPermCurve,
    capillary: CapillaryCurve,
    porosity: f64,
    permeability: f64,
    fluids: Fluids,
    /// Local maxima of D, located once at construction.
    critical_points: Vec<(f64, f64)>,
    d_max: f64,
}

impl RockRegion {
    pub fn new(
        kind: RegionKind,
        relperm_w: RelPermCurve,
        relperm_n: RelPermCurve,
        capillary: CapillaryCurve,
        porosity: f64,
        permeability: f64,
        fluids: Fluids,
    ) -> Result<Self> {
        if !(porosity > 0.0 && porosity <= 1.0) {
            return Err(Error::Config(format!("porosity must be in (0, 1], got {porosity}")));
        }
        if !(permeability > 0.0) {
            return Err(Error::Config(format!("permeability must be positive, got {permeability}")));
        }
        let mut region = Self {
            kind,
            relperm_w,
            relperm_n,
            capillary,
            porosity,
            permeability,
            fluids,
            critical_points: Vec::new(),
            d_max: 0.0,
        };
        region.locate_critical_points();
        Ok(region)
    }

    fn locate_critical_points(&mut self) {
        let h = 1.0 / SCAN_POINTS as f64;
        let d: Vec<f64> = (0..=SCAN_POINTS).map(|i| self.diffusion_unchecked(i as f64 * h).0).collect();
        let mut points = Vec::new();
        for i in 1..SCAN_POINTS {
            if d[i] > d[i - 1] && d[i] >= d[i + 1] {
                let s = golden_section_max(|s| self.diffusion_unchecked(s).0, (i - 1) as f64 * h, (i + 1) as f64 * h);
                points.push((s, self.diffusion_unchecked(s).0));
            }
        }
        self.d_max = points.iter().map(|p| p.1).fold(0.0, f64::max);
        self.critical_points = points;
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn relperm_w(&self) -> RelPermCurve {
        self.relperm_w
    }

    pub fn relperm_n(&self) -> RelPermCurve {
        self.relperm_n
    }

    pub fn capillary(&self) -> &CapillaryCurve {
        &self.capillary
    }

    pub fn porosity(&self) -> f64 {
        self.porosity
    }

    pub fn permeability(&self) -> f64 {
        self.permeability
    }

    pub fn fluids(&self) -> &Fluids {
        &self.fluids
    }

    /// Interior local maxima `(S, D)` of the capillary diffusion coefficient.
    pub fn diffusion_critical_points(&self) -> &[(f64, f64)] {
        &self.critical_points
    }

    /// Global maximum of D on `[0, 1]`.
    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// `(λ_w, dλ_w/dS)`.
    pub fn mobility_w(&self, s: f64) -> (f64, f64) {
        let (kr, dkr) = self.relperm_w.eval_unchecked(s);
        (kr / self.fluids.mu_w, dkr / self.fluids.mu_w)
    }

    /// `(λ_n, dλ_n/dS)` with S the wetting saturation.
    pub fn mobility_n(&self, s: f64) -> (f64, f64) {
        let (kr, dkr) = self.relperm_n.eval_unchecked(1.0 - s);
        (kr / self.fluids.mu_n, -dkr / self.fluids.mu_n)
    }

    /// `(Pc, dPc/dS)` without the domain check.
    pub fn pc(&self, s: f64) -> (f64, f64) {
        let (v, d1, _) = self.capillary.eval2(s);
        (v, d1)
    }

    pub fn pc2(&self, s: f64) -> (f64, f64, f64) {
        self.capillary.eval2(s)
    }

    /// Capillary diffusion coefficient and its derivative.
    pub fn capillary_diffusion(&self, s: f64) -> Result<(f64, f64)> {
        check_saturation(s)?;
        Ok(self.diffusion_unchecked(s))
    }

    pub(crate) fn diffusion_unchecked(&self, s: f64) -> (f64, f64) {
        let (lw, dlw) = self.mobility_w(s);
        let (ln, dln) = self.mobility_n(s);
        let lt = lw + ln;
        let (_, d1, d2) = self.capillary.eval2(s);
        if lt <= 0.0 {
            return (0.0, 0.0);
        }
        let f = lw * ln / lt;
        let df = (dlw * ln + lw * dln) / lt - lw * ln * (dlw + dln) / (lt * lt);
        (-f * d1, -df * d1 - f * d2)
    }

    /// Maximum of D over `[lo, hi]` with one-sided derivatives w.r.t. the
    /// interval ends.
    pub fn diffusion_max_on_interval(&self, lo: f64, hi: f64) -> IntervalMax {
        debug_assert!(lo <= hi);
        let (d_lo, dd_lo) = self.diffusion_unchecked(lo);
        if lo == hi {
            return IntervalMax { value: d_lo, d_lo: dd_lo, d_hi: 0.0 };
        }
        let (d_hi, dd_hi) = self.diffusion_unchecked(hi);
        let mut best = if d_lo >= d_hi {
            IntervalMax { value: d_lo, d_lo: dd_lo, d_hi: 0.0 }
        } else {
            IntervalMax { value: d_hi, d_lo: 0.0, d_hi: dd_hi }
        };
        for &(s, d) in &self.critical_points {
            if s > lo && s < hi && d > best.value {
                best = IntervalMax { value: d, d_lo: 0.0, d_hi: 0.0 };
            }
        }
        best
    }

    /// Saturation at which this region's capillary pressure vanishes.
    pub fn zero_pc_saturation(&self) -> f64 {
        self.capillary.inverse(0.0).expect("zero lies in every curve's range")
    }
}

fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-13 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `(kr, dkr/dS)` with the domain check.
pub fn rel_perm(curve: &RelPermCurve, s: f64) -> Result<(f64, f64)> {
    curve.eval(s)
}

pub fn capillary_pressure(curve: &CapillaryCurve, s: f64) -> Result<(f64, f64)> {
    curve.eval(s)
}

pub fn inverse_pc(curve: &CapillaryCurve, target: f64) -> Result<f64> {
    curve.inverse(target)
}
