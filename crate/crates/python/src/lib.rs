//! Python bindings: scenario configuration, runs, sweeps, rock curves and
//! the flux and truncation analyses.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fracflow::analysis::{flux_surface as surface, truncation_terms as terms, RecoverySeries};
use fracflow::config::{RelPermSet, ScenarioConfig, ScenarioKind};
use fracflow::interface::{solve_interface, InterfaceProblem, InterfaceSide, OneSidedKernel};
use fracflow::scenarios::{build_regions, refinement_sweep, run_config};
use fracflow::solver::RunStats;
use fracflow::{Error, RockRegion, Scheme};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::SaturationDomain(_) | Error::PressureRange { .. } | Error::Analysis(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn scheme(name: &str) -> PyResult<Scheme> {
    name.parse().map_err(to_py)
}

/// Scenario configuration; mirrors the TOML file accepted by the CLI.
#[pyclass(name = "ScenarioConfig", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyConfig {
    /// Defaults for `kind` in {"spontaneous", "forced"}.
    #[new]
    #[pyo3(signature = (kind = "spontaneous"))]
    fn new(kind: &str) -> PyResult<Self> {
        let inner = match kind {
            "spontaneous" => ScenarioConfig::new(ScenarioKind::Spontaneous),
            "forced" => ScenarioConfig::new(ScenarioKind::Forced),
            other => return Err(PyValueError::new_err(format!("unknown kind '{other}', expected spontaneous or forced"))),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ScenarioConfig::from_toml_str(text).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn from_path(path: &str) -> PyResult<Self> {
        ScenarioConfig::from_path(path.as_ref()).map(|inner| Self { inner }).map_err(to_py)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    #[getter]
    fn kind(&self) -> String {
        format!("{:?}", self.inner.kind).to_lowercase()
    }

    #[getter]
    fn get_scheme(&self) -> String {
        self.inner.scheme.clone()
    }

    #[setter]
    fn set_scheme(&mut self, value: &str) -> PyResult<()> {
        scheme(value)?;
        self.inner.scheme = value.into();
        Ok(())
    }

    #[getter]
    fn get_n_matrix(&self) -> usize {
        self.inner.n_matrix
    }

    #[setter]
    fn set_n_matrix(&mut self, n: usize) {
        self.inner.n_matrix = n;
    }

    /// "quadratic" or "cubic".
    #[getter]
    fn get_relperm(&self) -> String {
        format!("{:?}", self.inner.relperm).to_lowercase()
    }

    #[setter]
    fn set_relperm(&mut self, value: &str) -> PyResult<()> {
        self.inner.relperm = relperm(value)?;
        Ok(())
    }

    #[getter]
    fn get_end_time(&self) -> f64 {
        self.inner.time_window().0
    }

    /// End time in the scenario's natural unit (t_D or PVI).
    #[setter]
    fn set_end_time(&mut self, t: f64) {
        self.inner.time.end = Some(t);
    }

    fn __repr__(&self) -> String {
        format!("ScenarioConfig(kind={}, scheme={}, n_matrix={})", self.kind(), self.inner.scheme, self.inner.n_matrix)
    }
}

fn relperm(name: &str) -> PyResult<RelPermSet> {
    match name {
        "quadratic" => Ok(RelPermSet::Quadratic),
        "cubic" => Ok(RelPermSet::Cubic),
        other => Err(PyValueError::new_err(format!("unknown relperm '{other}', expected quadratic or cubic"))),
    }
}

/// Outcome of one scenario run.
#[pyclass(name = "RunResult", frozen)]
struct PyRunResult {
    #[pyo3(get)]
    scheme: String,
    /// Step times in seconds, starting at 0.
    #[pyo3(get)]
    times: Vec<f64>,
    /// Step times in the natural unit of the scenario.
    #[pyo3(get)]
    natural_times: Vec<f64>,
    #[pyo3(get)]
    cell_centers: Vec<f64>,
    /// Region name per cell.
    #[pyo3(get)]
    regions: Vec<String>,
    #[pyo3(get)]
    saturation: Vec<f64>,
    #[pyo3(get)]
    pressure: Vec<f64>,
    recovery: Option<RecoverySeries>,
    stats: RunStats,
    #[pyo3(get)]
    cumulative_injected: Vec<f64>,
    #[pyo3(get)]
    cumulative_produced_n: Vec<f64>,
}

#[pymethods]
impl PyRunResult {
    /// `(t_D, recovery %)` for spontaneous runs, else None.
    #[getter]
    fn recovery(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.recovery.as_ref().map(|r| (r.t_d.clone(), r.recovery.clone()))
    }

    /// Dimensionless time at which the recovery first reaches `pct`.
    fn time_to(&self, pct: f64) -> Option<f64> {
        self.recovery.as_ref().and_then(|r| r.time_to(pct))
    }

    #[getter]
    fn steps(&self) -> usize {
        self.stats.steps
    }

    #[getter]
    fn newton_iterations(&self) -> usize {
        self.stats.newton_iterations
    }

    #[getter]
    fn cuts(&self) -> usize {
        self.stats.cuts
    }

    fn __repr__(&self) -> String {
        format!("RunResult(scheme={}, steps={}, newton_iterations={})", self.scheme, self.stats.steps, self.stats.newton_iterations)
    }
}

/// Run a scenario to its end time. Raises RuntimeError if the solver aborts.
#[pyfunction]
fn run(py: Python<'_>, config: &PyConfig) -> PyResult<PyRunResult> {
    let cfg = config.inner.clone();
    let out = py.detach(|| run_config(&cfg)).map_err(to_py)?;
    let grid = &out.scenario.model.grid;
    let state = out.record.final_state();
    let steps = &out.record.steps;
    Ok(PyRunResult {
        scheme: out.scenario.model.scheme.to_string(),
        times: steps.iter().map(|s| s.time).collect(),
        natural_times: steps.iter().map(|s| s.time / out.scenario.time_scale).collect(),
        cell_centers: grid.cells.iter().map(|c| c.center).collect(),
        regions: grid.cells.iter().map(|c| c.region.as_str().to_string()).collect(),
        saturation: state.s.clone(),
        pressure: state.p.clone(),
        recovery: out.recovery,
        stats: out.record.stats,
        cumulative_injected: steps.iter().map(|s| s.cumulative_injected).collect(),
        cumulative_produced_n: steps.iter().map(|s| s.cumulative_produced_n).collect(),
    })
}

/// Refinement sweep of a spontaneous scenario. Returns one dict per member
/// with keys n_matrix, scheme, e2, t80, error.
#[pyfunction]
#[pyo3(signature = (config, resolutions, schemes = vec!["ppu".to_string(), "ppu-c".to_string(), "ihu-c".to_string()], reference_n = 128, reference_scheme = "ihu-c"))]
fn sweep<'py>(
    py: Python<'py>,
    config: &PyConfig,
    resolutions: Vec<usize>,
    schemes: Vec<String>,
    reference_n: usize,
    reference_scheme: &str,
) -> PyResult<Vec<Bound<'py, pyo3::types::PyDict>>> {
    let schemes = schemes.iter().map(|s| scheme(s)).collect::<PyResult<Vec<_>>>()?;
    let reference = (reference_n, scheme(reference_scheme)?);
    let cfg = config.inner.clone();
    let result = py.detach(|| refinement_sweep(&cfg, &resolutions, &schemes, reference)).map_err(to_py)?;
    result
        .entries
        .iter()
        .map(|e| {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("n_matrix", e.n_matrix)?;
            d.set_item("scheme", e.scheme.as_str())?;
            d.set_item("e2", e.e2)?;
            d.set_item("t80", e.t80)?;
            d.set_item("error", e.error.clone())?;
            Ok(d)
        })
        .collect()
}

/// Matrix or fracture rock curves of a scenario, in SI units.
#[pyclass(name = "Rock", frozen)]
struct PyRock {
    inner: RockRegion,
}

#[pymethods]
impl PyRock {
    /// Rock region `"matrix"` or `"fracture"` built from `config`.
    #[new]
    #[pyo3(signature = (config, region = "matrix"))]
    fn new(config: &PyConfig, region: &str) -> PyResult<Self> {
        let (m, f) = build_regions(&config.inner).map_err(to_py)?;
        let inner = match region {
            "matrix" => m,
            "fracture" => f,
            other => return Err(PyValueError::new_err(format!("unknown region '{other}', expected matrix or fracture"))),
        };
        Ok(Self { inner })
    }

    /// Capillary pressure [Pa] at wetting saturation `s`.
    fn pc(&self, s: f64) -> PyResult<f64> {
        self.inner.capillary().eval(s).map(|v| v.0).map_err(to_py)
    }

    /// Saturation with the given capillary pressure [Pa].
    fn inverse_pc(&self, pc: f64) -> PyResult<f64> {
        self.inner.capillary().inverse(pc).map_err(to_py)
    }

    /// `(λ_w, λ_n)` [1/(Pa s)].
    fn mobilities(&self, s: f64) -> PyResult<(f64, f64)> {
        if !(0.0..=1.0).contains(&s) {
            return Err(to_py(Error::SaturationDomain(s)));
        }
        Ok((self.inner.mobility_w(s).0, self.inner.mobility_n(s).0))
    }

    /// Capillary diffusion coefficient D(S) = -λ_w λ_n / λ_T · dPc/dS.
    fn diffusion(&self, s: f64) -> PyResult<f64> {
        self.inner.capillary_diffusion(s).map(|v| v.0).map_err(to_py)
    }

    #[getter]
    fn d_max(&self) -> f64 {
        self.inner.d_max()
    }

    #[getter]
    fn permeability(&self) -> f64 {
        self.inner.permeability()
    }

    #[getter]
    fn porosity(&self) -> f64 {
        self.inner.porosity()
    }
}

/// Interface saturations `(s_matrix, s_fracture)` for a matrix cell left of a
/// fracture cell at frozen total flux `u` [m³/s].
#[pyfunction]
#[pyo3(signature = (matrix, fracture, s_m, s_f, u, trans_m, trans_f, scheme = "ihu-c"))]
#[allow(clippy::too_many_arguments)]
fn interface_saturation(
    matrix: &PyRock,
    fracture: &PyRock,
    s_m: f64,
    s_f: f64,
    u: f64,
    trans_m: f64,
    trans_f: f64,
    scheme: &str,
) -> PyResult<(f64, f64)> {
    let kernel = match self::scheme(scheme)? {
        Scheme::IhuC => OneSidedKernel::Ihu,
        _ => OneSidedKernel::Ppu,
    };
    for s in [s_m, s_f] {
        if !(0.0..=1.0).contains(&s) {
            return Err(to_py(Error::SaturationDomain(s)));
        }
    }
    let problem = InterfaceProblem {
        left: InterfaceSide { region: &matrix.inner, trans: trans_m, dz: 0.0, saturation: s_m },
        right: InterfaceSide { region: &fracture.inner, trans: trans_f, dz: 0.0, saturation: s_f },
        u,
        kernel,
    };
    let scale = trans_m.min(trans_f) * matrix.inner.d_max();
    let r = solve_interface(&problem, 1e-12 * scale, 100).map_err(to_py)?;
    Ok((r.s_matrix, r.s_fracture))
}

/// Rows `(S_L, S_R, F_w, F_n, countercurrent)` over an `n × n` grid of
/// saturations, for nondimensional `u_t` and `trans`.
#[pyfunction]
#[pyo3(signature = (scheme, u_t, n = 200, trans = 1.0, relperm = "quadratic"))]
fn flux_surface(scheme: &str, u_t: f64, n: usize, trans: f64, relperm: &str) -> PyResult<Vec<(f64, f64, f64, f64, bool)>> {
    if n < 2 {
        return Err(PyValueError::new_err("n must be at least 2"));
    }
    let scheme = self::scheme(scheme)?;
    let kr = match self::relperm(relperm)? {
        RelPermSet::Quadratic => fracflow::RelPermCurve::quadratic(),
        RelPermSet::Cubic => fracflow::RelPermCurve::cubic(),
    };
    // plotting units: pressures in psi, unit viscosity and permeability
    let rock = fracflow::config::RockConfig::default();
    let curve = fracflow::petrophysics::fit_pc_bounds(rock.entry_pressure_psi, rock.theta, rock.pc_max_psi, rock.pc_min_psi).map_err(to_py)?;
    let fluids = fracflow::petrophysics::Fluids::new(1.0, 1.0, 1000.0, 800.0, 0.0).map_err(to_py)?;
    let region = RockRegion::new(
        fracflow::RegionKind::Matrix,
        kr,
        kr,
        fracflow::CapillaryCurve::Matrix(curve),
        rock.matrix_porosity,
        1.0,
        fluids,
    )
    .map_err(to_py)?;
    Ok(surface(scheme, u_t, trans, &region, n).into_iter().map(|r| (r.s_left, r.s_right, r.f_w, r.f_n, r.countercurrent)).collect())
}

/// Leading truncation-error terms on a monotone profile. Returns a dict of
/// lists: x, saturation, e_v, e_c_ihu, e_c_ppu, e_vc_ihu, e_vc_ppu.
#[pyfunction]
fn truncation_terms<'py>(
    py: Python<'py>,
    rock: &PyRock,
    x: Vec<f64>,
    s: Vec<f64>,
    u_t: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let p = terms(&x, &s, u_t, rock.inner.permeability(), &rock.inner).map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("x", p.x)?;
    d.set_item("saturation", p.saturation)?;
    d.set_item("e_v", p.e_v)?;
    d.set_item("e_c_ihu", p.e_c_ihu)?;
    d.set_item("e_c_ppu", p.e_c_ppu)?;
    d.set_item("e_vc_ihu", p.e_vc_ihu)?;
    d.set_item("e_vc_ppu", p.e_vc_ppu)?;
    Ok(d)
}

#[pymodule(name = "fracflow")]
fn fracflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SCHEMES", Scheme::ALL.iter().map(|s| s.as_str()).collect::<Vec<_>>())?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PyRock>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(interface_saturation, m)?)?;
    m.add_function(wrap_pyfunction!(flux_surface, m)?)?;
    m.add_function(wrap_pyfunction!(truncation_terms, m)?)?;
    Ok(())
}
