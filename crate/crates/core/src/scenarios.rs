//! Spontaneous and forced imbibition set-ups, custom layouts and refinement
//! sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{characteristic_time, error_norms, recovery_curve, RecoverySeries};
use crate::config::{ScenarioConfig, ScenarioKind};
use crate::error::{Error, Result};
use crate::grid::{build_forced_grid, build_spontaneous_grid, Grid1D, Segment};
use crate::petrophysics::{
    fit_pc_bounds, CapillaryCurve, FractureCapillaryCurve, Fluids, RegionKind, RelPermCurve, RockRegion,
};
use crate::solver::{Model, Scheme, SimulationRecord, State, TimeControl, Well};
use crate::units::{CENTIPOISE, MILLIDARCY, PSI, SECONDS_PER_DAY};

/// Relative change allowed over the final step for a run to count as
/// steady.
pub const STEADY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    /// Dimensionless diffusion time.
    TD,
    /// Pore volumes injected.
    Pvi,
    Seconds,
}

impl TimeUnit {
    pub fn label(&self) -> &'static str {
        match self {
            TimeUnit::TD => "t_d",
            TimeUnit::Pvi => "pvi",
            TimeUnit::Seconds => "time_s",
        }
    }
}

/// A fully built run: model, initial state and time control in seconds.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: Model,
    pub initial: State,
    pub control: TimeControl,
    /// Seconds per natural time unit.
    pub time_scale: f64,
    pub unit: TimeUnit,
    /// Natural-unit times the stepper lands on.
    pub sample_times: Vec<f64>,
}

/// Matrix and fracture regions in SI units.
pub fn build_regions(cfg: &ScenarioConfig) -> Result<(RockRegion, RockRegion)> {
    let r = &cfg.rock;
    let f = &cfg.fluids;
    let fluids = Fluids::new(
        f.viscosity_w_cp * CENTIPOISE,
        f.viscosity_n_cp * CENTIPOISE,
        f.density_w_kg_m3,
        f.density_n_kg_m3,
        f.gravity_m_s2,
    )?;
    let kr = RelPermCurve::new(cfg.relperm.exponent())?;
    let matrix = RockRegion::new(
        RegionKind::Matrix,
        kr,
        kr,
        CapillaryCurve::Matrix(fit_pc_bounds(
            r.entry_pressure_psi * PSI,
            r.theta,
            r.pc_max_psi * PSI,
            r.pc_min_psi * PSI,
        )?),
        r.matrix_porosity,
        r.matrix_permeability_md * MILLIDARCY,
        fluids,
    )?;
    let fracture = RockRegion::new(
        RegionKind::Fracture,
        RelPermCurve::linear(),
        RelPermCurve::linear(),
        CapillaryCurve::Fracture(FractureCapillaryCurve::new(r.fracture_pc_max_psi * PSI)?),
        r.fracture_porosity,
        r.fracture_permeability_md * MILLIDARCY,
        fluids,
    )?;
    Ok((matrix, fracture))
}

fn build_grid(cfg: &ScenarioConfig) -> Result<Grid1D> {
    let r = &cfg.rock;
    let g = &cfg.geometry;
    let (km, kf) = (r.matrix_permeability_md * MILLIDARCY, r.fracture_permeability_md * MILLIDARCY);
    let phi = (r.matrix_porosity, r.fracture_porosity);
    match cfg.kind {
        ScenarioKind::Spontaneous => build_spontaneous_grid(
            cfg.n_matrix,
            cfg.n_fracture(),
            g.length_m,
            km,
            kf,
            phi,
            cfg.fracture_pv_multiplier(),
            g.area_m2,
        ),
        ScenarioKind::Forced => {
            let mut grid = build_forced_grid(cfg.n_matrix, g.length_m, km, kf, phi, cfg.tilt_deg(), g.area_m2)?;
            let mult = cfg.fracture_pv_multiplier();
            for c in grid.cells.iter_mut().filter(|c| c.region == RegionKind::Fracture) {
                c.pore_volume *= mult;
            }
            Ok(grid)
        }
        ScenarioKind::Custom => {
            let segments: Vec<Segment> = cfg
                .segments
                .iter()
                .map(|s| Segment {
                    region: s.region,
                    length: s.length_m,
                    cells: s.cells,
                    permeability: if s.region == RegionKind::Matrix { km } else { kf },
                    porosity: if s.region == RegionKind::Matrix { phi.0 } else { phi.1 },
                    pv_multiplier: s.pv_multiplier,
                })
                .collect();
            Grid1D::from_segments(&segments, g.area_m2, cfg.tilt_deg())
        }
    }
}

/// `n` log-spaced values from `first` to `last` inclusive.
pub fn log_samples(first: f64, last: f64, n: usize) -> Vec<f64> {
    if n == 0 || last <= 0.0 {
        return Vec::new();
    }
    if n == 1 || first >= last {
        return vec![last];
    }
    let (a, b) = (first.ln(), last.ln());
    (0..n).map(|k| if k + 1 == n { last } else { (a + (b - a) * k as f64 / (n - 1) as f64).exp() }).collect()
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig) -> Result<Scenario> {
        cfg.validate()?;
        let scheme = cfg.scheme()?;
        let (matrix, fracture) = build_regions(cfg)?;
        let grid = build_grid(cfg)?;
        let n = grid.n_cells();
        let bhp = cfg.wells.producer_bhp_psi * PSI;

        let mut wells = Vec::new();
        let (injector, producer) = match cfg.kind {
            ScenarioKind::Forced => (Some(cfg.wells.injector_cell.unwrap_or(0)), Some(cfg.wells.producer_cell.unwrap_or(n - 1))),
            _ => (cfg.wells.injector_cell, cfg.wells.producer_cell),
        };
        let rate = cfg.injection_rate_m3_per_day().unwrap_or(0.0) / SECONDS_PER_DAY;
        if let Some(cell) = injector {
            wells.push(Well::RateInjector { cell, rate });
        }
        if let Some(cell) = producer {
            let c = grid
                .cells
                .get(cell)
                .ok_or_else(|| Error::Config(format!("producer cell {cell} outside grid of {n} cells")))?;
            let well_index = cfg.wells.well_index_multiplier * c.permeability * grid.area / c.dx;
            wells.push(Well::PressureProducer { cell, bhp, well_index });
        }

        let s0: Vec<f64> = match cfg.kind {
            ScenarioKind::Custom => cfg
                .segments
                .iter()
                .flat_map(|s| std::iter::repeat(s.initial_sw).take(s.cells))
                .collect(),
            _ => {
                let (sm, sf) = cfg.initial_sw();
                grid.cells.iter().map(|c| if c.region == RegionKind::Matrix { sm } else { sf }).collect()
            }
        };
        let initial = State::uniform_pressure(cfg.initial.pressure_psi * PSI, s0);

        let (time_scale, unit) = match cfg.kind {
            ScenarioKind::Spontaneous => (
                characteristic_time(matrix.permeability(), matrix.d_max(), matrix.porosity(), cfg.geometry.length_m),
                TimeUnit::TD,
            ),
            ScenarioKind::Forced => {
                if !(rate > 0.0) {
                    return Err(Error::Config("forced runs need a positive injection rate".into()));
                }
                let pv: f64 = grid.cells.iter().map(|c| c.pore_volume).sum();
                (pv / rate, TimeUnit::Pvi)
            }
            ScenarioKind::Custom => (1.0, TimeUnit::Seconds),
        };

        let (end, dt0, dtmax) = cfg.time_window();
        let first = cfg.time.first_sample.unwrap_or(dt0).min(end);
        let sample_times = log_samples(first, end, cfg.time.samples);
        let mut control = TimeControl::new(end * time_scale, dt0 * time_scale, dtmax * time_scale);
        control.growth = cfg.time.growth;
        control.max_cuts = cfg.time.max_cuts;
        control.sample_times = sample_times.iter().map(|t| t * time_scale).collect();
        control.snapshot_times = cfg.snapshot_times().iter().map(|t| t * time_scale).collect();

        let mut model = Model::new(grid, matrix, fracture, wells, scheme)?;
        model.newton = cfg.newton;
        Ok(Scenario { config: cfg.clone(), model, initial, control, time_scale, unit, sample_times })
    }

    pub fn run(&self) -> SimulationRecord {
        self.model.run(self.initial.clone(), &self.control)
    }

    /// Recovery curve restricted to the sample times.
    pub fn recovery(&self, record: &SimulationRecord) -> Result<RecoverySeries> {
        let full = recovery_curve(record, self.time_scale, STEADY_TOL)?;
        Ok(full.resample(&self.sample_times))
    }
}

/// Matrix trapping and production histories of a forced run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcedSeries {
    pub pvi: Vec<f64>,
    pub average_matrix_sn: Vec<f64>,
    /// Non-wetting production rate in pore volumes per PVI.
    pub production_rate_n: Vec<f64>,
    pub cumulative_produced_n: Vec<f64>,
}

impl ForcedSeries {
    pub fn from_record(scenario: &Scenario, record: &SimulationRecord) -> Self {
        let pv_m: f64 = scenario.model.grid.cells_in(RegionKind::Matrix).map(|(_, c)| c.pore_volume).sum();
        let pv = record.total_pore_volume;
        let q: f64 = scenario
            .model
            .wells
            .iter()
            .map(|w| match w {
                Well::RateInjector { rate, .. } => *rate,
                _ => 0.0,
            })
            .sum();
        ForcedSeries {
            pvi: record.pvi(),
            average_matrix_sn: record.steps.iter().map(|s| s.matrix_nonwetting_volume / pv_m).collect(),
            production_rate_n: record.steps.iter().map(|s| if q > 0.0 { s.production_rate_n / q } else { 0.0 }).collect(),
            cumulative_produced_n: record.steps.iter().map(|s| s.cumulative_produced_n / pv).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub scenario: Scenario,
    pub record: SimulationRecord,
    pub recovery: Option<RecoverySeries>,
    pub forced: Option<ForcedSeries>,
}

fn finished(scenario: &Scenario, record: &SimulationRecord) -> Result<()> {
    match &record.failure {
        Some(msg) => Err(Error::RunAborted(format!("{} ({})", msg, scenario.model.scheme))),
        None => Ok(()),
    }
}

/// Capillary-driven imbibition from a fracture into a dry matrix.
pub fn spontaneous_imbibition(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    if cfg.kind != ScenarioKind::Spontaneous {
        return Err(Error::Config("spontaneous_imbibition needs kind = \"spontaneous\"".into()));
    }
    let scenario = Scenario::build(cfg)?;
    let record = scenario.run();
    finished(&scenario, &record)?;
    let recovery = scenario.recovery(&record)?;
    Ok(ScenarioOutput { scenario, record, recovery: Some(recovery), forced: None })
}

/// Wetting injection through a fracture–matrix–fracture column.
pub fn forced_imbibition(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    if cfg.kind != ScenarioKind::Forced {
        return Err(Error::Config("forced_imbibition needs kind = \"forced\"".into()));
    }
    let scenario = Scenario::build(cfg)?;
    let record = scenario.run();
    finished(&scenario, &record)?;
    let forced = ForcedSeries::from_record(&scenario, &record);
    Ok(ScenarioOutput { scenario, record, recovery: None, forced: Some(forced) })
}

/// Dispatch on the configured kind.
pub fn run_config(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    match cfg.kind {
        ScenarioKind::Spontaneous => spontaneous_imbibition(cfg),
        ScenarioKind::Forced => forced_imbibition(cfg),
        ScenarioKind::Custom => {
            let scenario = Scenario::build(cfg)?;
            let record = scenario.run();
            finished(&scenario, &record)?;
            Ok(ScenarioOutput { scenario, record, recovery: None, forced: None })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub n_matrix: usize,
    pub scheme: Scheme,
    pub e2: Option<f64>,
    pub t80: Option<f64>,
    pub recovery: Option<RecoverySeries>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub reference_n: usize,
    pub reference_scheme: Scheme,
    pub reference: RecoverySeries,
    pub entries: Vec<SweepEntry>,
}

impl SweepResult {
    pub fn entry(&self, n: usize, scheme: Scheme) -> Option<&SweepEntry> {
        self.entries.iter().find(|e| e.n_matrix == n && e.scheme == scheme)
    }

    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(crate::output::fmt).unwrap_or_default();
        let mut out = String::from("n_matrix,scheme,e2,t80,error\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.n_matrix,
                e.scheme,
                fmt(e.e2),
                fmt(e.t80),
                e.error.as_deref().unwrap_or("").replace(',', ";")
            ));
        }
        out
    }
}

fn spontaneous_variant(base: &ScenarioConfig, n: usize, scheme: Scheme) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.n_matrix = n;
    cfg.n_fracture = Some(n);
    cfg.scheme = scheme.as_str().into();
    cfg
}

/// Run every `(N, scheme)` pair of a spontaneous set-up plus the reference in
/// parallel and tabulate `E2` against the reference. Member failures are
/// recorded and do not stop the sweep; a failed reference does.
pub fn refinement_sweep(
    base: &ScenarioConfig,
    resolutions: &[usize],
    schemes: &[Scheme],
    reference: (usize, Scheme),
) -> Result<SweepResult> {
    let mut jobs: Vec<(usize, Scheme)> = vec![reference];
    for &n in resolutions {
        for &s in schemes {
            if (n, s) != reference {
                jobs.push((n, s));
            }
        }
    }
    let results: Vec<Result<RecoverySeries>> = jobs
        .par_iter()
        .map(|&(n, s)| spontaneous_imbibition(&spontaneous_variant(base, n, s)).map(|o| o.recovery.expect("spontaneous")))
        .collect();
    let mut results = results.into_iter();
    let reference_series = results.next().expect("reference job")?;
    let entries = jobs[1..]
        .iter()
        .zip(results)
        .map(|(&(n, scheme), r)| match r {
            Ok(series) => SweepEntry {
                n_matrix: n,
                scheme,
                e2: Some(error_norms(&series, &reference_series).e2),
                t80: series.time_to(80.0),
                recovery: Some(series),
                error: None,
            },
            Err(e) => SweepEntry { n_matrix: n, scheme, e2: None, t80: None, recovery: None, error: Some(e.to_string()) },
        })
        .collect();
    Ok(SweepResult { reference_n: reference.0, reference_scheme: reference.1, reference: reference_series, entries })
}
