//! Post-processing: recovery curves, error norms, truncation-error terms and
//! flux surfaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{ihu_transport_flux, ppu_transport_flux};
use crate::petrophysics::RockRegion;
use crate::solver::{Scheme, SimulationRecord};

/// `t_D = k D_max t / (φ L²)`.
pub fn dimensionless_time(t: f64, k: f64, d_max: f64, porosity: f64, length: f64) -> f64 {
    k * d_max * t / (porosity * length * length)
}

/// Seconds per unit of dimensionless time.
pub fn characteristic_time(k: f64, d_max: f64, porosity: f64, length: f64) -> f64 {
    porosity * length * length / (k * d_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySeries {
    pub t_d: Vec<f64>,
    /// Percent of the final cumulative non-wetting efflux from the matrix.
    pub recovery: Vec<f64>,
}

impl RecoverySeries {
    /// First time the curve reaches `pct`, by linear interpolation.
    pub fn time_to(&self, pct: f64) -> Option<f64> {
        for k in 0..self.recovery.len() {
            if self.recovery[k] >= pct {
                if k == 0 {
                    return Some(self.t_d[0]);
                }
                let (r0, r1) = (self.recovery[k - 1], self.recovery[k]);
                let (t0, t1) = (self.t_d[k - 1], self.t_d[k]);
                return Some(t0 + (pct - r0) / (r1 - r0) * (t1 - t0));
            }
        }
        None
    }

    /// Recovery at time `t` by linear interpolation.
    pub fn at(&self, t: f64) -> f64 {
        interpolate(&self.t_d, &self.recovery, t)
    }

    /// Restrict to the given sample times.
    pub fn resample(&self, t: &[f64]) -> RecoverySeries {
        RecoverySeries { t_d: t.to_vec(), recovery: t.iter().map(|&x| self.at(x)).collect() }
    }
}

/// Piecewise-linear interpolation, constant outside the data range.
pub fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    assert!(!xs.is_empty() && xs.len() == ys.len());
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 1.0 };
    ys[k - 1] + w * (ys[k] - ys[k - 1])
}

/// Recovery percentage at every step of a spontaneous-imbibition run.
///
/// `t_char` converts seconds into dimensionless time. The run must end in a
/// steady state: the matrix non-wetting volume may change by no more than
/// `steady_tol` (relative to the total efflux) over the last step.
pub fn recovery_curve(record: &SimulationRecord, t_char: f64, steady_tol: f64) -> Result<RecoverySeries> {
    if let Some(f) = &record.failure {
        return Err(Error::Analysis(format!("run did not complete: {f}")));
    }
    let steps = &record.steps;
    if steps.len() < 2 {
        return Err(Error::Analysis("run has no time steps".into()));
    }
    let v0 = steps[0].matrix_nonwetting_volume;
    let v_end = steps[steps.len() - 1].matrix_nonwetting_volume;
    let total = v0 - v_end;
    if total.abs() <= f64::EPSILON * v0.abs().max(1.0) {
        return Err(Error::Analysis("no non-wetting phase left the matrix".into()));
    }
    let change = (steps[steps.len() - 2].matrix_nonwetting_volume - v_end).abs() / total.abs();
    if change > steady_tol {
        return Err(Error::Analysis(format!(
            "steady state not reached: relative change {change:e} over the last step exceeds {steady_tol:e}; run longer"
        )));
    }
    Ok(RecoverySeries {
        t_d: steps.iter().map(|s| s.time / t_char).collect(),
        recovery: steps.iter().map(|s| 100.0 * (v0 - s.matrix_nonwetting_volume) / total).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub t_d: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: f64,
}

/// Pointwise recovery error on `series`'s own samples (reference
/// interpolated) and its maximum.
pub fn error_norms(series: &RecoverySeries, reference: &RecoverySeries) -> ErrorNorms {
    let e1: Vec<f64> = series.t_d.iter().zip(&series.recovery).map(|(&t, &r)| (r - reference.at(t)).abs()).collect();
    let e2 = e1.iter().copied().fold(0.0, f64::max);
    ErrorNorms { t_d: series.t_d.clone(), e1, e2 }
}

/// Central differences inside, one-sided at the ends.
pub fn gradient(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len();
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    (v[1] - v[0]) / dx
                } else if i == n - 1 {
                    (v[n - 1] - v[n - 2]) / dx
                } else {
                    (v[i + 1] - v[i - 1]) / (2.0 * dx)
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationProfile {
    pub x: Vec<f64>,
    pub saturation: Vec<f64>,
    /// Viscous term, shared by both upwindings.
    pub e_v: Vec<f64>,
    pub e_c_ihu: Vec<f64>,
    pub e_c_ppu: Vec<f64>,
    pub e_vc_ihu: Vec<f64>,
    pub e_vc_ppu: Vec<f64>,
}

impl TruncationProfile {
    /// Keep the cells with `lo <= x <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> TruncationProfile {
        let keep: Vec<usize> = (0..self.x.len()).filter(|&i| self.x[i] >= lo && self.x[i] <= hi).collect();
        let pick = |v: &Vec<f64>| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        TruncationProfile {
            x: pick(&self.x),
            saturation: pick(&self.saturation),
            e_v: pick(&self.e_v),
            e_c_ihu: pick(&self.e_c_ihu),
            e_c_ppu: pick(&self.e_c_ppu),
            e_vc_ihu: pick(&self.e_vc_ihu),
            e_vc_ppu: pick(&self.e_vc_ppu),
        }
    }
}

/// Leading truncation-error terms of the IHU and PPU fluxes on a monotone
/// cocurrent saturation profile sampled at uniformly spaced cell centres.
///
/// `u_t` is the total Darcy velocity [m/s] and `k` the permeability [m²].
pub fn truncation_terms(x: &[f64], s: &[f64], u_t: f64, k: f64, region: &RockRegion) -> Result<TruncationProfile> {
    let n = s.len();
    if n < 3 || x.len() != n {
        return Err(Error::Analysis("truncation analysis needs at least three cells".into()));
    }
    let dx = x[1] - x[0];
    if x.windows(2).any(|w| ((w[1] - w[0]) - dx).abs() > 1e-9 * dx.abs()) || dx <= 0.0 {
        return Err(Error::Analysis("truncation analysis needs uniformly spaced increasing cell centres".into()));
    }
    let up = s.windows(2).all(|w| w[1] >= w[0]);
    let down = s.windows(2).all(|w| w[1] <= w[0]);
    if !(up || down) {
        return Err(Error::Analysis("saturation profile is not monotone on the segment".into()));
    }
    let mw: Vec<f64> = s
        .iter()
        .map(|&v| {
            let (lw, ln) = (region.mobility_w(v).0, region.mobility_n(v).0);
            lw / (lw + ln)
        })
        .collect();
    let d: Vec<f64> = s.iter().map(|&v| region.capillary_diffusion(v).map(|r| r.0)).collect::<Result<_>>()?;
    let sx = gradient(s, dx);
    let sxx = gradient(&sx, dx);
    let mwxx = gradient(&gradient(&mw, dx), dx);
    let e_v: Vec<f64> = mwxx.iter().map(|m| -0.5 * dx * m * u_t).collect();

    let a: Vec<f64> = d.iter().zip(&sx).map(|(d, g)| d * g).collect();
    let b: Vec<f64> = d.iter().zip(&sxx).map(|(d, g)| d * g).collect();
    let axx = gradient(&gradient(&a, dx), dx);
    let bx = gradient(&b, dx);
    let e_c_ihu: Vec<f64> = axx.iter().zip(&bx).map(|(p, q)| 0.5 * k * dx * (p - q)).collect();

    let c: Vec<f64> = (0..n)
        .map(|i| {
            let ln = region.mobility_n(s[i]).0;
            let pc2 = region.pc2(s[i]).2;
            mw[i] * ln * pc2 * sx[i] * sx[i]
        })
        .collect();
    let cx = gradient(&c, dx);
    let e_c_ppu: Vec<f64> = e_c_ihu.iter().zip(&cx).map(|(h, g)| -h + 0.5 * k * dx * g).collect();
    let e_vc_ihu = e_v.iter().zip(&e_c_ihu).map(|(v, c)| v + c).collect();
    let e_vc_ppu = e_v.iter().zip(&e_c_ppu).map(|(v, c)| v + c).collect();
    Ok(TruncationProfile { x: x.to_vec(), saturation: s.to_vec(), e_v, e_c_ihu, e_c_ppu, e_vc_ihu, e_vc_ppu })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxSample {
    pub s_left: f64,
    pub s_right: f64,
    pub f_w: f64,
    pub f_n: f64,
    pub countercurrent: bool,
}

/// Wetting flux over an `n × n` grid of `(S_L, S_R)` in `[0, 1]²` for a
/// fixed total flux. PPU-C samples the PPU kernel and IHU-C the IHU kernel;
/// all inputs are taken as already nondimensional.
pub fn flux_surface(scheme: Scheme, u_t: f64, trans: f64, region: &RockRegion, n: usize) -> Vec<FluxSample> {
    assert!(n >= 2, "flux surface needs at least two samples per axis");
    let h = 1.0 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let (sl, sr) = (a as f64 * h, b as f64 * h);
            let f_w = match scheme {
                Scheme::Ppu | Scheme::PpuC => ppu_transport_flux(trans, 0.0, region, region, u_t, sl, sr).value,
                Scheme::IhuC => ihu_transport_flux(trans, 0.0, region, u_t, sl, sr).value,
            };
            let f_n = u_t - f_w;
            out.push(FluxSample { s_left: sl, s_right: sr, f_w, f_n, countercurrent: f_w * f_n < 0.0 });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petrophysics::*;

    fn matrix() -> RockRegion {
        RockRegion::new(
            RegionKind::Matrix,
            RelPermCurve::quadratic(),
            RelPermCurve::quadratic(),
            CapillaryCurve::Matrix(fit_pc_bounds(3.0, 4.0, 15.0, -15.0).unwrap()),
            0.2,
            1.0,
            Fluids::new(1.0, 1.0, 1000.0, 800.0, 0.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn dimensionless_time_scaling() {
        assert_eq!(dimensionless_time(0.0, 1.0, 2.0, 0.2, 20.0), 0.0);
        let a = dimensionless_time(5.0, 1.0, 2.0, 0.2, 20.0);
        let b = dimensionless_time(5.0, 1.0, 2.0, 0.2, 40.0);
        assert!((a / b - 4.0).abs() < 1e-14);
        let t = characteristic_time(1.0, 2.0, 0.2, 20.0);
        assert!((dimensionless_time(t, 1.0, 2.0, 0.2, 20.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn recovery_time_interpolation() {
        let s = RecoverySeries { t_d: vec![0.0, 1.0, 2.0], recovery: vec![0.0, 60.0, 100.0] };
        assert!((s.time_to(80.0).unwrap() - 1.5).abs() < 1e-14);
        assert_eq!(s.time_to(101.0), None);
        assert_eq!(s.at(0.5), 30.0);
    }

    #[test]
    fn identical_series_have_zero_error() {
        let s = RecoverySeries { t_d: vec![0.0, 0.5, 1.0], recovery: vec![0.0, 70.0, 100.0] };
        let e = error_norms(&s, &s);
        assert!(e.e1.iter().all(|&v| v == 0.0));
        assert_eq!(e.e2, 0.0);
    }

    #[test]
    fn uniform_profile_has_no_truncation_error() {
        let x: Vec<f64> = (0..6).map(|i| i as f64 + 0.5).collect();
        let p = truncation_terms(&x, &[0.6; 6], 1.0, 1.0, &matrix()).unwrap();
        for v in [&p.e_v, &p.e_c_ihu, &p.e_c_ppu, &p.e_vc_ihu, &p.e_vc_ppu] {
            assert!(v.iter().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn non_monotone_profile_rejected() {
        let x: Vec<f64> = (0..4).map(|i| i as f64).collect();
        let err = truncation_terms(&x, &[0.6, 0.7, 0.65, 0.8], 1.0, 1.0, &matrix()).unwrap_err();
        assert!(matches!(err, Error::Analysis(_)));
    }

    #[test]
    fn flux_surface_diagonal_is_zero_at_zero_total() {
        let m = matrix();
        for scheme in [Scheme::Ppu, Scheme::IhuC] {
            let rows = flux_surface(scheme, 0.0, 1.0, &m, 11);
            assert_eq!(rows.len(), 121);
            for r in rows.iter().filter(|r| r.s_left == r.s_right) {
                assert!(r.f_w.abs() < 1e-12, "{scheme}: {r:?}");
            }
        }
    }

    #[test]
    fn ihu_surface_bounded() {
        let m = matrix();
        for r in flux_surface(Scheme::IhuC, 0.0, 1.0, &m, 41) {
            assert!(r.f_w.abs() <= m.d_max() + 1e-12);
        }
    }
}
