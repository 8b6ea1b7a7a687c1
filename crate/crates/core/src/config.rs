//! Scenario configuration in TOML.
//!
//! Keys carry their unit (`entry_pressure_psi`, `length_m`, ...). Every
//! field has a default; several defaults depend on the scenario kind and are
//! resolved by the accessors below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::petrophysics::RegionKind;
use crate::solver::{NewtonConfig, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Spontaneous,
    Forced,
    Custom,
}

/// Matrix relative-permeability exponent. Fracture curves are always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelPermSet {
    #[default]
    Quadratic,
    Cubic,
}

impl RelPermSet {
    pub fn exponent(&self) -> u32 {
        match self {
            RelPermSet::Quadratic => 2,
            RelPermSet::Cubic => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RockConfig {
    pub entry_pressure_psi: f64,
    pub theta: f64,
    pub pc_max_psi: f64,
    pub pc_min_psi: f64,
    pub fracture_pc_max_psi: f64,
    pub matrix_permeability_md: f64,
    pub fracture_permeability_md: f64,
    pub matrix_porosity: f64,
    pub fracture_porosity: f64,
}

impl Default for RockConfig {
    fn default() -> Self {
        Self {
            entry_pressure_psi: 3.0,
            theta: 4.0,
            pc_max_psi: 15.0,
            pc_min_psi: -15.0,
            fracture_pc_max_psi: 0.1,
            matrix_permeability_md: 1.0,
            fracture_permeability_md: 1e5,
            matrix_porosity: 0.2,
            fracture_porosity: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidConfig {
    pub viscosity_w_cp: f64,
    pub viscosity_n_cp: f64,
    pub density_w_kg_m3: f64,
    pub density_n_kg_m3: f64,
    pub gravity_m_s2: f64,
}

impl Default for FluidConfig {
    fn default() -> Self {
        Self {
            viscosity_w_cp: 1.0,
            viscosity_n_cp: 1.0,
            density_w_kg_m3: 1000.0,
            density_n_kg_m3: 800.0,
            gravity_m_s2: crate::units::GRAVITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub length_m: f64,
    pub area_m2: f64,
    /// Default 0 for spontaneous, 15 for forced.
    pub tilt_deg: Option<f64>,
    /// Default 100 for spontaneous, 1 otherwise.
    pub fracture_pv_multiplier: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { length_m: 20.0, area_m2: 1.0, tilt_deg: None, fracture_pv_multiplier: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WellConfig {
    /// Wetting injection rate; forced default is [`DEFAULT_INJECTION_RATE_M3_PER_DAY`].
    pub injection_rate_m3_per_day: Option<f64>,
    pub producer_bhp_psi: f64,
    /// Producer well index as a multiple of the cell's `k A / dx`.
    pub well_index_multiplier: f64,
    /// Forced default: first cell. Custom default: no injector.
    pub injector_cell: Option<usize>,
    /// Forced default: last cell. Custom default: no producer.
    pub producer_cell: Option<usize>,
}

impl Default for WellConfig {
    fn default() -> Self {
        Self {
            injection_rate_m3_per_day: None,
            producer_bhp_psi: 3000.0,
            well_index_multiplier: 1e3,
            injector_cell: None,
            producer_cell: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    /// Spontaneous default 0, forced default 0.5.
    pub matrix_sw: Option<f64>,
    /// Spontaneous default 1, forced default 0.97.
    pub fracture_sw: Option<f64>,
    pub pressure_psi: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { matrix_sw: None, fracture_sw: None, pressure_psi: 3000.0 }
    }
}

/// Times are in the scenario's natural unit: dimensionless diffusion time for
/// spontaneous runs, pore volumes injected for forced runs and seconds for
/// custom runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub end: Option<f64>,
    pub dt_init: Option<f64>,
    pub dt_max: Option<f64>,
    pub growth: f64,
    pub max_cuts: usize,
    /// Number of log-spaced sample times the stepper lands on.
    pub samples: usize,
    pub first_sample: Option<f64>,
    pub snapshots: Option<Vec<f64>>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            end: None,
            dt_init: None,
            dt_max: None,
            growth: 1.5,
            max_cuts: 10,
            samples: 200,
            first_sample: None,
            snapshots: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub region: RegionKind,
    pub length_m: f64,
    pub cells: usize,
    pub initial_sw: f64,
    #[serde(default = "one")]
    pub pv_multiplier: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub resolutions: Vec<usize>,
    pub schemes: Vec<String>,
    pub reference_resolution: usize,
    pub reference_scheme: String,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            resolutions: vec![1, 2, 4, 8, 16, 32, 64],
            schemes: vec!["ppu".into(), "ppu-c".into(), "ihu-c".into()],
            reference_resolution: 128,
            reference_scheme: "ihu-c".into(),
        }
    }
}

/// Injection rate calibrated so the forced case reaches steady state before
/// 1 PVI while the matrix stays on the negative branch of its capillary
/// curve.
pub const DEFAULT_INJECTION_RATE_M3_PER_DAY: f64 = 1.3e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default)]
    pub relperm: RelPermSet,
    #[serde(default = "default_cells")]
    pub n_matrix: usize,
    /// Spontaneous only; defaults to `n_matrix`.
    #[serde(default)]
    pub n_fracture: Option<usize>,
    #[serde(default)]
    pub rock: RockConfig,
    #[serde(default)]
    pub fluids: FluidConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub wells: WellConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub segments: Vec<SegmentConfig>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_scheme() -> String {
    "ihu-c".into()
}

fn default_cells() -> usize {
    8
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            scheme: default_scheme(),
            relperm: RelPermSet::default(),
            n_matrix: if kind == ScenarioKind::Forced { 10 } else { default_cells() },
            n_fracture: None,
            rock: RockConfig::default(),
            fluids: FluidConfig::default(),
            geometry: GeometryConfig::default(),
            wells: WellConfig::default(),
            initial: InitialConfig::default(),
            time: TimeConfig::default(),
            newton: NewtonConfig::default(),
            segments: Vec::new(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn spontaneous() -> Self {
        Self::new(ScenarioKind::Spontaneous)
    }

    pub fn forced() -> Self {
        Self::new(ScenarioKind::Forced)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config '{}': {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn scheme(&self) -> Result<Scheme> {
        self.scheme.parse()
    }

    pub fn n_fracture(&self) -> usize {
        self.n_fracture.unwrap_or(self.n_matrix)
    }

    pub fn tilt_deg(&self) -> f64 {
        self.geometry.tilt_deg.unwrap_or(if self.kind == ScenarioKind::Forced { 15.0 } else { 0.0 })
    }

    pub fn fracture_pv_multiplier(&self) -> f64 {
        self.geometry
            .fracture_pv_multiplier
            .unwrap_or(if self.kind == ScenarioKind::Spontaneous { 100.0 } else { 1.0 })
    }

    pub fn injection_rate_m3_per_day(&self) -> Option<f64> {
        match self.kind {
            ScenarioKind::Forced => Some(self.wells.injection_rate_m3_per_day.unwrap_or(DEFAULT_INJECTION_RATE_M3_PER_DAY)),
            _ => self.wells.injection_rate_m3_per_day,
        }
    }

    pub fn initial_sw(&self) -> (f64, f64) {
        let (m, f) = match self.kind {
            ScenarioKind::Forced => (0.5, 0.97),
            _ => (0.0, 1.0),
        };
        (self.initial.matrix_sw.unwrap_or(m), self.initial.fracture_sw.unwrap_or(f))
    }

    /// `(end, dt_init, dt_max)` in the natural time unit.
    pub fn time_window(&self) -> (f64, f64, f64) {
        let (end, dt0, dtmax) = match self.kind {
            ScenarioKind::Spontaneous => (1.5, 1e-4, 1e-2),
            ScenarioKind::Forced => (1.0, 1e-4, 1e-2),
            ScenarioKind::Custom => (1.0, 1e-3, 1e-1),
        };
        (self.time.end.unwrap_or(end), self.time.dt_init.unwrap_or(dt0), self.time.dt_max.unwrap_or(dtmax))
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.time.snapshots.clone().unwrap_or_else(|| match self.kind {
            ScenarioKind::Spontaneous => vec![0.0008, 0.008, 0.08, 0.8],
            ScenarioKind::Forced => vec![0.01, 0.1, 1.0],
            ScenarioKind::Custom => vec![],
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let r = &self.rock;
        positive("rock.entry_pressure_psi", r.entry_pressure_psi)?;
        positive("rock.pc_max_psi", r.pc_max_psi)?;
        positive("rock.fracture_pc_max_psi", r.fracture_pc_max_psi)?;
        positive("rock.matrix_permeability_md", r.matrix_permeability_md)?;
        positive("rock.fracture_permeability_md", r.fracture_permeability_md)?;
        if !(r.theta > 1.0) {
            return Err(Error::Config(format!("rock.theta must exceed 1, got {}", r.theta)));
        }
        if !(r.pc_min_psi < 0.0) {
            return Err(Error::Config(format!("rock.pc_min_psi must be negative, got {}", r.pc_min_psi)));
        }
        for (name, phi) in [("rock.matrix_porosity", r.matrix_porosity), ("rock.fracture_porosity", r.fracture_porosity)] {
            if !(phi > 0.0 && phi <= 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1], got {phi}")));
            }
        }
        positive("fluids.viscosity_w_cp", self.fluids.viscosity_w_cp)?;
        positive("fluids.viscosity_n_cp", self.fluids.viscosity_n_cp)?;
        positive("geometry.length_m", self.geometry.length_m)?;
        positive("geometry.area_m2", self.geometry.area_m2)?;
        positive("geometry.fracture_pv_multiplier", self.fracture_pv_multiplier())?;
        if self.n_matrix == 0 || self.n_fracture() == 0 {
            return Err(Error::Config("cell counts must be at least 1".into()));
        }
        if self.kind == ScenarioKind::Forced && self.n_matrix % 2 != 0 {
            return Err(Error::Config(format!("forced runs need an even n_matrix, got {}", self.n_matrix)));
        }
        if self.kind == ScenarioKind::Custom && self.segments.is_empty() {
            return Err(Error::Config("custom runs need at least one [[segments]] entry".into()));
        }
        let (sm, sf) = self.initial_sw();
        for s in [sm, sf].into_iter().chain(self.segments.iter().map(|s| s.initial_sw)) {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Config(format!("initial saturation {s} outside [0, 1]")));
            }
        }
        let (end, dt0, dtmax) = self.time_window();
        if !(end >= 0.0) {
            return Err(Error::Config(format!("time.end must be nonnegative, got {end}")));
        }
        positive("time.dt_init", dt0)?;
        positive("time.dt_max", dtmax)?;
        if !(self.time.growth >= 1.0) {
            return Err(Error::Config(format!("time.growth must be at least 1, got {}", self.time.growth)));
        }
        if let Some(q) = self.injection_rate_m3_per_day() {
            if !(q >= 0.0) {
                return Err(Error::Config(format!("wells.injection_rate_m3_per_day must be nonnegative, got {q}")));
            }
        }
        for s in &self.sweep.schemes {
            s.parse::<Scheme>()?;
        }
        self.sweep.reference_scheme.parse::<Scheme>()?;
        Ok(())
    }
}
