//! Fully implicit time stepping.
//!
//! Unknowns are interleaved per cell as `[p_0, S_0, p_1, S_1, ...]` with `p`
//! the non-wetting pressure and `S` the wetting saturation. Rows follow the
//! same layout: wetting balance then non-wetting balance. The residual is
//! written in volume form,
//!
//! ```text
//! r_l,i = PV_i (S_l,i - S_l,i^old) + dt (sum of outgoing F_l - q_l,i)
//! ```
//!
//! so `|r| / PV` is the dimensionless convergence measure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::flux::{ihu_flux, ppu_flux, total_velocity_ppu, FluxValue, P_I, P_J, S_I, S_J};
use crate::grid::Grid1D;
use crate::interface::{
    interface_sensitivities, solve_interface, validate_curves, InterfaceProblem, InterfaceSide, OneSidedKernel,
};
use crate::petrophysics::{RegionKind, RockRegion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Ppu,
    PpuC,
    IhuC,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Ppu, Scheme::PpuC, Scheme::IhuC];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Ppu => "ppu",
            Scheme::PpuC => "ppu-c",
            Scheme::IhuC => "ihu-c",
        }
    }

    fn interface_kernel(&self) -> Option<OneSidedKernel> {
        match self {
            Scheme::Ppu => None,
            Scheme::PpuC => Some(OneSidedKernel::Ppu),
            Scheme::IhuC => Some(OneSidedKernel::Ihu),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ppu" => Ok(Scheme::Ppu),
            "ppu-c" | "ppuc" => Ok(Scheme::PpuC),
            "ihu-c" | "ihuc" => Ok(Scheme::IhuC),
            other => Err(Error::Config(format!("unknown scheme '{other}'; expected one of ppu, ppu-c, ihu-c"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub p: Vec<f64>,
    pub s: Vec<f64>,
}

impl State {
    pub fn uniform_pressure(p: f64, s: Vec<f64>) -> Self {
        Self { p: vec![p; s.len()], s }
    }

    pub fn n_cells(&self) -> usize {
        self.s.len()
    }

    /// Same state with `dp` added to every pressure.
    pub fn shifted(&self, dp: f64) -> Self {
        Self { p: self.p.iter().map(|p| p + dp).collect(), s: self.s.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Well {
    /// Injects the wetting phase at a fixed rate [m3/s].
    RateInjector { cell: usize, rate: f64 },
    /// Produces both phases at a fixed bottomhole pressure [Pa].
    PressureProducer { cell: usize, bhp: f64, well_index: f64 },
}

impl Well {
    pub fn cell(&self) -> usize {
        match *self {
            Well::RateInjector { cell, .. } | Well::PressureProducer { cell, .. } => cell,
        }
    }
}

/// A source term and its derivatives w.r.t. its own cell's `(p, S)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Source {
    pub value: f64,
    pub d_p: f64,
    pub d_s: f64,
}

/// Per-well phase source terms, positive for injection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellTerm {
    pub cell: usize,
    pub w: Source,
    pub n: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    /// Bound on `max |r| / PV`.
    pub tol: f64,
    pub max_newton: usize,
    /// Largest saturation change allowed per iteration before damping.
    pub max_ds: f64,
    /// Local interface residual bound, relative to `min(PV_i, PV_j) / dt`.
    pub interface_tol: f64,
    pub interface_max_iter: usize,
    /// Step halvings tried per iteration when the Euclidean residual grows.
    pub line_search: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_newton: 25, max_ds: 0.2, interface_tol: 1e-12, interface_max_iter: 100, line_search: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeControl {
    pub t_end: f64,
    pub dt_init: f64,
    pub dt_max: f64,
    pub growth: f64,
    pub cut: f64,
    pub max_cuts: usize,
    /// Times the stepper lands on exactly.
    pub sample_times: Vec<f64>,
    /// Times at which full states are stored.
    pub snapshot_times: Vec<f64>,
}

impl TimeControl {
    pub fn new(t_end: f64, dt_init: f64, dt_max: f64) -> Self {
        Self { t_end, dt_init, dt_max, growth: 1.5, cut: 0.5, max_cuts: 10, sample_times: Vec::new(), snapshot_times: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceRecord {
    pub face: usize,
    pub position: f64,
    pub s_matrix: f64,
    pub s_fracture: f64,
    pub clamped: bool,
}

pub struct Assembly {
    pub residual: Vec<f64>,
    pub jacobian: BandedMatrix,
    pub interfaces: Vec<InterfaceRecord>,
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub state: State,
    pub iterations: usize,
    /// Scaled residual norm before each iteration, last entry converged.
    pub history: Vec<f64>,
    pub interfaces: Vec<InterfaceRecord>,
    pub degenerate: usize,
}

/// Grid, rock regions, wells and flux scheme.
#[derive(Debug, Clone)]
pub struct Model {
    pub grid: Grid1D,
    pub matrix: RockRegion,
    pub fracture: RockRegion,
    pub wells: Vec<Well>,
    pub scheme: Scheme,
    pub newton: NewtonConfig,
}

impl Model {
    pub fn new(grid: Grid1D, matrix: RockRegion, fracture: RockRegion, wells: Vec<Well>, scheme: Scheme) -> Result<Self> {
        if matrix.kind() != RegionKind::Matrix || fracture.kind() != RegionKind::Fracture {
            return Err(Error::Config("region kinds must be (matrix, fracture)".into()));
        }
        for w in &wells {
            if w.cell() >= grid.n_cells() {
                return Err(Error::Config(format!("well cell {} outside grid of {} cells", w.cell(), grid.n_cells())));
            }
        }
        if scheme.interface_kernel().is_some() && grid.region_boundaries().count() > 0 {
            validate_curves(matrix.capillary(), fracture.capillary())?;
        }
        Ok(Self { grid, matrix, fracture, wells, scheme, newton: NewtonConfig::default() })
    }

    pub fn region(&self, cell: usize) -> &RockRegion {
        match self.grid.cells[cell].region {
            RegionKind::Matrix => &self.matrix,
            RegionKind::Fracture => &self.fracture,
        }
    }

    /// Without a pressure-controlled well the pressure level is free and cell
    /// 0's non-wetting row is replaced by a pin.
    pub fn pressure_pinned(&self) -> bool {
        !self.wells.iter().any(|w| matches!(w, Well::PressureProducer { .. }))
    }

    /// Source terms of every well at `state`.
    pub fn apply_wells(&self, state: &State) -> Vec<WellTerm> {
        self.wells
            .iter()
            .map(|w| match *w {
                Well::RateInjector { cell, rate } => {
                    WellTerm { cell, w: Source { value: rate, d_p: 0.0, d_s: 0.0 }, n: Source::default() }
                }
                Well::PressureProducer { cell, bhp, well_index } => {
                    let region = self.region(cell);
                    let s = state.s[cell];
                    let dp = state.p[cell] - bhp;
                    let source = |(l, dl): (f64, f64)| Source {
                        value: -well_index * l * dp,
                        d_p: -well_index * l,
                        d_s: -well_index * dl * dp,
                    };
                    WellTerm { cell, w: source(region.mobility_w(s)), n: source(region.mobility_n(s)) }
                }
            })
            .collect()
    }

    /// Wetting and non-wetting flux across `face` from left to right.
    pub fn face_flux(
        &self,
        state: &State,
        face: usize,
        interface_tol: f64,
    ) -> Result<(FluxValue, FluxValue, Option<InterfaceRecord>, bool)> {
        let f = &self.grid.faces[face];
        let (i, j) = (f.left, f.right);
        let (ri, rj) = (self.region(i), self.region(j));
        let (p_i, p_j, s_i, s_j) = (state.p[i], state.p[j], state.s[i], state.s[j]);
        let kernel = self.scheme.interface_kernel();
        if !f.region_boundary || kernel.is_none() {
            return Ok(match self.scheme {
                Scheme::IhuC if !f.region_boundary => {
                    let (w, n) = ihu_flux(f.trans, f.dz, ri, p_i, p_j, s_i, s_j);
                    (w, n, None, false)
                }
                _ => {
                    let e = ppu_flux(f.trans, f.dz, ri, rj, p_i, p_j, s_i, s_j);
                    (e.w, e.n, None, false)
                }
            });
        }
        let u = total_velocity_ppu(f.trans, f.dz, ri, rj, p_i, p_j, s_i, s_j);
        let problem = InterfaceProblem {
            left: InterfaceSide { region: ri, trans: f.trans_left, dz: f.dz_left, saturation: s_i },
            right: InterfaceSide { region: rj, trans: f.trans_right, dz: f.dz_right, saturation: s_j },
            u: u.value,
            kernel: kernel.expect("checked above"),
        };
        let res = solve_interface(&problem, interface_tol, self.newton.interface_max_iter)?;
        let (sens, degenerate) = match interface_sensitivities(&res) {
            Ok(s) => (s, false),
            Err(_) => (Default::default(), true),
        };
        let mut dd = u.grad.map(|g| sens.d_u * g);
        dd[S_I] += sens.d_s_left;
        dd[S_J] += sens.d_s_right;

        let (fl, fr) = (res.flux_left, res.flux_right);
        let left_grad = |k: usize| {
            let mut g = fl.d_u * u.grad[k] + fl.d_sj * res.ds_left * dd[k];
            if k == S_I {
                g += fl.d_si;
            }
            g
        };
        let right_grad = |k: usize| {
            let mut g = -fr.d_u * u.grad[k] + fr.d_sj * res.ds_right * dd[k];
            if k == S_J {
                g += fr.d_si;
            }
            -g
        };
        // A clamped solve leaves R != 0, so only the left flux is a faithful
        // function of the cell variables.
        let grad = if res.clamped {
            [left_grad(P_I), left_grad(P_J), left_grad(S_I), left_grad(S_J)]
        } else {
            [left_grad(P_I), right_grad(P_J), left_grad(S_I), right_grad(S_J)]
        };
        let w = FluxValue { value: fl.value, grad };
        let n = u.sub(&w);
        let rec = InterfaceRecord {
            face,
            position: f.position,
            s_matrix: res.s_matrix,
            s_fracture: res.s_fracture,
            clamped: res.clamped,
        };
        Ok((w, n, Some(rec), degenerate))
    }

    /// Residual and Jacobian. The pressure pin is not applied here.
    pub fn assemble(&self, state: &State, old: &State, dt: f64) -> Result<Assembly> {
        let n = self.grid.n_cells();
        let mut r = vec![0.0; 2 * n];
        let mut jac = BandedMatrix::zeros(2 * n, 3, 3);
        for (c, cell) in self.grid.cells.iter().enumerate() {
            let pv = cell.pore_volume;
            r[2 * c] += pv * (state.s[c] - old.s[c]);
            r[2 * c + 1] += -pv * (state.s[c] - old.s[c]);
            jac.add(2 * c, 2 * c + 1, pv);
            jac.add(2 * c + 1, 2 * c + 1, -pv);
        }
        let mut interfaces = Vec::new();
        let mut degenerate = 0;
        for (k, f) in self.grid.faces.iter().enumerate() {
            let (i, j) = (f.left, f.right);
            let pv = self.grid.cells[i].pore_volume.min(self.grid.cells[j].pore_volume);
            let tol = self.newton.interface_tol * pv / dt;
            let (w, nw, rec, deg) = self.face_flux(state, k, tol)?;
            if let Some(rec) = rec {
                interfaces.push(rec);
            }
            degenerate += deg as usize;
            let cols = [2 * i, 2 * j, 2 * i + 1, 2 * j + 1];
            for (phase, flux) in [(0, &w), (1, &nw)] {
                r[2 * i + phase] += dt * flux.value;
                r[2 * j + phase] -= dt * flux.value;
                for (col, g) in cols.iter().zip(flux.grad) {
                    jac.add(2 * i + phase, *col, dt * g);
                    jac.add(2 * j + phase, *col, -dt * g);
                }
            }
        }
        for t in self.apply_wells(state) {
            let c = t.cell;
            for (phase, src) in [(0, t.w), (1, t.n)] {
                r[2 * c + phase] -= dt * src.value;
                jac.add(2 * c + phase, 2 * c, -dt * src.d_p);
                jac.add(2 * c + phase, 2 * c + 1, -dt * src.d_s);
            }
        }
        Ok(Assembly { residual: r, jacobian: jac, interfaces, degenerate })
    }

    /// `max |r| / PV` over cells and phases.
    pub fn scaled_norm(&self, residual: &[f64]) -> f64 {
        self.grid
            .cells
            .iter()
            .enumerate()
            .map(|(c, cell)| residual[2 * c].abs().max(residual[2 * c + 1].abs()) / cell.pore_volume)
            .fold(0.0, f64::max)
    }

    /// `sqrt(sum (r / PV)^2)` over cells and phases.
    fn merit(&self, residual: &[f64]) -> f64 {
        self.grid
            .cells
            .iter()
            .enumerate()
            .map(|(c, cell)| (residual[2 * c].powi(2) + residual[2 * c + 1].powi(2)) / cell.pore_volume.powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Newton iteration for one time step starting from `guess`.
    pub fn newton(&self, old: &State, guess: State, dt: f64, p_ref: f64) -> Result<NewtonOutcome> {
        let cfg = &self.newton;
        let mut x = guess;
        let mut a = self.assemble(&x, old, dt)?;
        let mut norm = self.scaled_norm(&a.residual);
        let mut history = vec![norm];
        let mut degenerate = a.degenerate;
        for it in 0..=cfg.max_newton {
            if !norm.is_finite() {
                break;
            }
            if norm < cfg.tol {
                return Ok(NewtonOutcome { state: x, iterations: it, history, interfaces: a.interfaces, degenerate });
            }
            if it == cfg.max_newton {
                break;
            }
            let mut jac = a.jacobian.clone();
            let mut rhs: Vec<f64> = a.residual.iter().map(|v| -v).collect();
            if self.pressure_pinned() {
                jac.clear_row(1);
                jac.set(1, 0, 1.0);
                rhs[1] = -(x.p[0] - p_ref);
            }
            let dx = crate::banded::solve(&jac, &rhs)?;
            let max_ds = (0..x.n_cells()).map(|c| dx[2 * c + 1].abs()).fold(0.0, f64::max);
            let mut alpha = if max_ds > cfg.max_ds { cfg.max_ds / max_ds } else { 1.0 };
            // Backtrack on the Euclidean merit, for which the Newton direction
            // is a descent direction; keep the best trial if none improves.
            let merit = self.merit(&a.residual);
            let mut best: Option<(f64, State, Assembly)> = None;
            for _ in 0..=cfg.line_search {
                let trial = self.take_step(&x, &dx, alpha);
                let ta = self.assemble(&trial, old, dt)?;
                let tm = self.merit(&ta.residual);
                if best.as_ref().map_or(true, |b| tm < b.0 || !b.0.is_finite()) {
                    best = Some((tm, trial, ta));
                }
                if tm < merit {
                    break;
                }
                alpha *= 0.5;
            }
            let (_, trial, ta) = best.expect("at least one trial");
            let tn = self.scaled_norm(&ta.residual);
            x = trial;
            a = ta;
            norm = tn;
            degenerate += a.degenerate;
            history.push(norm);
        }
        Err(Error::NewtonDivergence { iterations: cfg.max_newton, residual: history.last().copied().unwrap_or(f64::NAN) })
    }

    fn take_step(&self, x: &State, dx: &[f64], alpha: f64) -> State {
        let mut y = x.clone();
        for c in 0..y.n_cells() {
            y.p[c] += alpha * dx[2 * c];
            y.s[c] = (y.s[c] + alpha * dx[2 * c + 1]).clamp(0.0, 1.0);
        }
        y
    }

    pub fn nonwetting_volume(&self, state: &State, region: RegionKind) -> f64 {
        self.grid.cells_in(region).map(|(c, cell)| cell.pore_volume * (1.0 - state.s[c])).sum()
    }

    pub fn total_pore_volume(&self) -> f64 {
        self.grid.cells.iter().map(|c| c.pore_volume).sum()
    }

    /// Copy with every pressure measured from `datum`.
    fn gauged(&self, datum: f64) -> Model {
        let mut m = self.clone();
        for w in &mut m.wells {
            if let Well::PressureProducer { bhp, .. } = w {
                *bhp -= datum;
            }
        }
        m
    }

    /// Advance from `initial` to `control.t_end`.
    pub fn run(&self, initial: State, control: &TimeControl) -> SimulationRecord {
        // Newton works on gauge pressure: in a high-permeability fracture the
        // spacing of doubles near reservoir pressure is a visible flux.
        let datum = initial.p[0];
        let mut record = self.gauged(datum).run_gauge(initial.shifted(-datum), control);
        for snap in &mut record.snapshots {
            snap.state = snap.state.shifted(datum);
        }
        record
    }

    fn run_gauge(&self, initial: State, control: &TimeControl) -> SimulationRecord {
        let p_ref = 0.0;
        let mut record = SimulationRecord {
            scheme: self.scheme,
            steps: Vec::new(),
            snapshots: Vec::new(),
            stats: RunStats::default(),
            total_pore_volume: self.total_pore_volume(),
            failure: None,
        };
        let mut stops: Vec<f64> = control
            .sample_times
            .iter()
            .chain(&control.snapshot_times)
            .copied()
            .filter(|&t| t > 0.0 && t < control.t_end)
            .chain(std::iter::once(control.t_end))
            .collect();
        stops.sort_by(f64::total_cmp);
        stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        let wants_snapshot = |t: f64| control.snapshot_times.iter().any(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1e-300));

        let mut state = initial;
        let initial_interfaces = self.assemble(&state, &state, 1.0).map(|a| a.interfaces).unwrap_or_default();
        record.push_step(self, &state, 0.0, 0.0, 0, &[]);
        record.snapshots.push(Snapshot { time: 0.0, state: state.clone(), interfaces: initial_interfaces });
        if control.t_end <= 0.0 {
            return record;
        }
        let mut t = 0.0;
        let mut dt = control.dt_init;
        let mut stop_idx = 0;
        while stop_idx < stops.len() {
            let target = stops[stop_idx];
            let mut dt_try = dt.min(target - t);
            if target - t - dt_try <= 1e-9 * dt_try {
                dt_try = target - t;
            }
            let mut cuts = 0;
            let outcome = loop {
                match self.newton(&state, state.clone(), dt_try, p_ref) {
                    Ok(o) => break Ok(o),
                    Err(e) => {
                        cuts += 1;
                        record.stats.cuts += 1;
                        if cuts > control.max_cuts {
                            break Err(Error::TooManyCuts { cuts: cuts - 1, time: t }.to_string() + &format!(" ({e})"));
                        }
                        dt_try *= control.cut;
                    }
                }
            };
            let outcome = match outcome {
                Ok(o) => o,
                Err(msg) => {
                    record.failure = Some(msg);
                    break;
                }
            };
            let reached = dt_try >= target - t - 1e-9 * dt_try;
            t = if reached { target } else { t + dt_try };
            state = outcome.state;
            record.stats.steps += 1;
            record.stats.newton_iterations += outcome.iterations;
            record.stats.degenerate_sensitivities += outcome.degenerate;
            record.stats.interface_clamps += outcome.interfaces.iter().filter(|r| r.clamped).count();
            let wells = self.apply_wells(&state);
            record.push_step(self, &state, t, dt_try, outcome.iterations, &wells);
            if reached {
                if wants_snapshot(t) || stop_idx + 1 == stops.len() {
                    record.snapshots.push(Snapshot { time: t, state: state.clone(), interfaces: outcome.interfaces });
                }
                stop_idx += 1;
            }
            dt = if cuts == 0 { (dt * control.growth).min(control.dt_max) } else { dt_try.min(control.dt_max) };
        }
        record
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    pub dt: f64,
    pub newton_iterations: usize,
    pub matrix_nonwetting_volume: f64,
    pub fracture_nonwetting_volume: f64,
    /// Wetting injection rate [m3/s].
    pub injection_rate: f64,
    /// Produced rates, positive out of the domain [m3/s].
    pub production_rate_w: f64,
    pub production_rate_n: f64,
    pub cumulative_injected: f64,
    pub cumulative_produced_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub state: State,
    pub interfaces: Vec<InterfaceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    pub newton_iterations: usize,
    pub cuts: usize,
    pub interface_clamps: usize,
    pub degenerate_sensitivities: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub scheme: Scheme,
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub stats: RunStats,
    pub total_pore_volume: f64,
    /// Set when the run aborted; the record holds everything up to then.
    pub failure: Option<String>,
}

impl SimulationRecord {
    fn push_step(&mut self, model: &Model, state: &State, time: f64, dt: f64, iterations: usize, wells: &[WellTerm]) {
        let mut injection = 0.0;
        let (mut prod_w, mut prod_n) = (0.0, 0.0);
        for t in wells {
            if t.w.value > 0.0 {
                injection += t.w.value;
            } else {
                prod_w -= t.w.value;
            }
            prod_n -= t.n.value;
        }
        let (cum_inj, cum_n) = self.steps.last().map_or((0.0, 0.0), |s| (s.cumulative_injected, s.cumulative_produced_n));
        self.steps.push(StepRecord {
            time,
            dt,
            newton_iterations: iterations,
            matrix_nonwetting_volume: model.nonwetting_volume(state, RegionKind::Matrix),
            fracture_nonwetting_volume: model.nonwetting_volume(state, RegionKind::Fracture),
            injection_rate: injection,
            production_rate_w: prod_w,
            production_rate_n: prod_n,
            cumulative_injected: cum_inj + dt * injection,
            cumulative_produced_n: cum_n + dt * prod_n,
        });
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn final_state(&self) -> &State {
        &self.snapshots.last().expect("record always holds the initial state").state
    }

    /// Pore volumes injected at each step.
    pub fn pvi(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.cumulative_injected / self.total_pore_volume).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::*;
    use crate::petrophysics::*;
    use crate::units::*;

    fn regions(gravity: f64) -> (RockRegion, RockRegion) {
        let fl = Fluids::new(CENTIPOISE, CENTIPOISE, 1000.0, 800.0, gravity).unwrap();
        let m = RockRegion::new(
            RegionKind::Matrix,
            RelPermCurve::quadratic(),
            RelPermCurve::quadratic(),
            CapillaryCurve::Matrix(fit_pc_bounds(3.0 * PSI, 4.0, 15.0 * PSI, -15.0 * PSI).unwrap()),
            0.2,
            MILLIDARCY,
            fl,
        )
        .unwrap();
        let f = RockRegion::new(
            RegionKind::Fracture,
            RelPermCurve::linear(),
            RelPermCurve::linear(),
            CapillaryCurve::Fracture(FractureCapillaryCurve::new(0.1 * PSI).unwrap()),
            0.2,
            1e5 * MILLIDARCY,
            fl,
        )
        .unwrap();
        (m, f)
    }

    fn spontaneous(scheme: Scheme, n: usize) -> (Model, State) {
        let (m, f) = regions(GRAVITY);
        let grid = build_spontaneous_grid(n, n, 20.0, MILLIDARCY, 1e5 * MILLIDARCY, (0.2, 0.2), 100.0, 1.0).unwrap();
        let s = grid.cells.iter().map(|c| if c.region == RegionKind::Matrix { 0.0 } else { 1.0 }).collect();
        (Model::new(grid, m, f, vec![], scheme).unwrap(), State::uniform_pressure(3000.0 * PSI, s))
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
        let err = "upwind".parse::<Scheme>().unwrap_err().to_string();
        assert!(err.contains("ppu, ppu-c, ihu-c"));
    }

    #[test]
    fn equilibrium_state_has_zero_residual() {
        for scheme in Scheme::ALL {
            let (model, _) = spontaneous(scheme, 3);
            // matrix at Pc = 0, fracture full of wetting phase: no driving force
            let s: Vec<f64> =
                model.grid.cells.iter().map(|c| if c.region == RegionKind::Matrix { 0.5 } else { 1.0 }).collect();
            let state = State::uniform_pressure(1e7, s);
            let a = model.assemble(&state, &state, 10.0).unwrap();
            let norm = model.scaled_norm(&a.residual);
            assert!(norm < 1e-9, "{scheme}: {norm:e}");
        }
    }

    #[test]
    fn wells_without_drive() {
        let (m, f) = regions(0.0);
        let grid = build_forced_grid(4, 20.0, MILLIDARCY, 1e5 * MILLIDARCY, (0.2, 0.2), 0.0, 1.0).unwrap();
        let model = Model::new(
            grid,
            m,
            f,
            vec![Well::PressureProducer { cell: 7, bhp: 2e7, well_index: 1.0 }],
            Scheme::Ppu,
        )
        .unwrap();
        let state = State::uniform_pressure(2e7, vec![0.5; 8]);
        let t = model.apply_wells(&state);
        assert_eq!(t[0].w.value, 0.0);
        assert_eq!(t[0].n.value, 0.0);
        let none = Model { wells: vec![], ..model };
        assert!(none.apply_wells(&state).is_empty());
    }

    #[test]
    fn first_step_converges_for_every_scheme() {
        for scheme in Scheme::ALL {
            let (model, state) = spontaneous(scheme, 4);
            let out = model.newton(&state, state.clone(), 1e5, state.p[0]).unwrap();
            assert!(out.iterations > 0, "{scheme}");
            assert!(out.state.s.iter().all(|s| (0.0..=1.0).contains(s)));
        }
    }

    #[test]
    fn converged_state_needs_no_iterations() {
        let (model, state) = spontaneous(Scheme::IhuC, 2);
        let out = model.newton(&state, state.clone(), 1e5, state.p[0]).unwrap();
        let again = model.newton(&out.state, out.state.clone(), 1e-30, state.p[0]).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn zero_length_run_keeps_initial_state() {
        let (model, state) = spontaneous(Scheme::Ppu, 2);
        let rec = model.run(state.clone(), &TimeControl::new(0.0, 1.0, 1.0));
        assert_eq!(rec.snapshots.len(), 1);
        assert_eq!(rec.snapshots[0].state, state);
        assert_eq!(rec.steps.len(), 1);
    }
}
