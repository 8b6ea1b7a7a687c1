use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fracflow::analysis::{error_norms, flux_surface as surface, truncation_terms, RecoverySeries};
use fracflow::config::{RelPermSet, ScenarioConfig, ScenarioKind};
use fracflow::output::{csv_table, fmt, write_atomic};
use fracflow::petrophysics::{fit_pc_bounds, Fluids};
use fracflow::scenarios::{build_regions, refinement_sweep, run_config, Scenario};
use fracflow::solver::Well;
use fracflow::units::PSI;
use fracflow::{CapillaryCurve, Error, RegionKind, RelPermCurve, Result, RockRegion, Scheme, State};

use crate::manifest::{GridSummary, RunManifest};
use crate::{RelPerm, Region, OUTPUT_ROOT_ENV};

fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("fracflow-output"))
}

fn config_name(cfg: &ScenarioConfig, path: &Path) -> String {
    cfg.output.directory.clone().unwrap_or_else(|| {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
    })
}

fn resolve(out: Option<PathBuf>, name: &str) -> PathBuf {
    out.unwrap_or_else(|| output_root().join(name))
}

fn to_json(cfg: &ScenarioConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

/// Collects the names of the files written into one output directory.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Outputs { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn profile_csv(scenario: &Scenario, state: &State) -> String {
    let grid = &scenario.model.grid;
    let length = scenario.config.geometry.length_m;
    let mut out = String::from("cell,x_m,x_d,region,pressure_pa,s_w,s_n\n");
    for (i, c) in grid.cells.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{},{},{}\n",
            fmt(c.center),
            fmt(c.center / length),
            c.region.as_str(),
            fmt(state.p[i]),
            fmt(state.s[i]),
            fmt(1.0 - state.s[i])
        ));
    }
    out
}

fn recovery_csv(series: &RecoverySeries, e1: Option<&[f64]>) -> String {
    match e1 {
        Some(e1) => csv_table(
            &["t_d", "recovery_pct", "e1"],
            series.t_d.iter().zip(&series.recovery).zip(e1).map(|((&t, &r), &e)| vec![t, r, e]),
        ),
        None => csv_table(&["t_d", "recovery_pct"], series.t_d.iter().zip(&series.recovery).map(|(&t, &r)| vec![t, r])),
    }
}

pub fn run(config: &Path, out: Option<PathBuf>) -> Result<PathBuf> {
    let cfg = ScenarioConfig::from_path(config)?;
    let started = Instant::now();
    let output = run_config(&cfg)?;
    let scenario = &output.scenario;
    let record = &output.record;
    let mut files = Outputs::new(resolve(out, &config_name(&cfg, config)))?;

    files.write("config.toml", &cfg.to_toml_string())?;
    files.write("grid.csv", &scenario.model.grid.to_csv())?;
    let unit = scenario.unit.label();
    let steps = csv_table(
        &[
            "time_s",
            unit,
            "dt_s",
            "newton_iterations",
            "matrix_nonwetting_m3",
            "fracture_nonwetting_m3",
            "injection_m3_s",
            "production_w_m3_s",
            "production_n_m3_s",
            "cumulative_injected_m3",
            "cumulative_produced_n_m3",
        ],
        record.steps.iter().map(|s| {
            vec![
                s.time,
                s.time / scenario.time_scale,
                s.dt,
                s.newton_iterations as f64,
                s.matrix_nonwetting_volume,
                s.fracture_nonwetting_volume,
                s.injection_rate,
                s.production_rate_w,
                s.production_rate_n,
                s.cumulative_injected,
                s.cumulative_produced_n,
            ]
        }),
    );
    files.write("steps.csv", &steps)?;
    if let Some(series) = &output.recovery {
        files.write("recovery.csv", &recovery_csv(series, None))?;
    }
    if let Some(f) = &output.forced {
        let rows = (0..f.pvi.len()).map(|k| vec![f.pvi[k], f.average_matrix_sn[k], f.production_rate_n[k], f.cumulative_produced_n[k]]);
        files.write("forced.csv", &csv_table(&["pvi", "average_matrix_sn", "production_rate_n", "cumulative_produced_n"], rows))?;
    }
    for (k, snap) in record.snapshots.iter().enumerate() {
        let t = snap.time / scenario.time_scale;
        let mut text = format!("# {unit} = {}\n", fmt(t));
        text.push_str(&profile_csv(scenario, &snap.state));
        files.write(&format!("profile_{k:02}.csv"), &text)?;
    }
    files.write("profile_final.csv", &profile_csv(scenario, record.final_state()))?;

    RunManifest {
        command: "run",
        config: to_json(&cfg),
        scheme: Some(scenario.model.scheme.to_string()),
        grid: Some(GridSummary::of(&scenario.model.grid)),
        newton: Some(record.stats),
        wall_time_s: started.elapsed().as_secs_f64(),
        files: files.files.clone(),
    }
    .write(&files.dir)?;
    Ok(files.dir)
}

pub fn sweep(config: &Path, out: Option<PathBuf>) -> Result<PathBuf> {
    let cfg = ScenarioConfig::from_path(config)?;
    if cfg.kind != ScenarioKind::Spontaneous {
        return Err(Error::Config("sweeps are defined for kind = \"spontaneous\"".into()));
    }
    let schemes = cfg.sweep.schemes.iter().map(|s| s.parse()).collect::<Result<Vec<Scheme>>>()?;
    let reference = (cfg.sweep.reference_resolution, cfg.sweep.reference_scheme.parse()?);
    let started = Instant::now();
    let result = refinement_sweep(&cfg, &cfg.sweep.resolutions, &schemes, reference)?;
    let mut files = Outputs::new(resolve(out, &format!("{}-sweep", config_name(&cfg, config))))?;

    files.write("config.toml", &cfg.to_toml_string())?;
    files.write("sweep.csv", &result.to_csv())?;
    files.write("reference.csv", &recovery_csv(&result.reference, None))?;
    for e in &result.entries {
        if let Some(series) = &e.recovery {
            let norms = error_norms(series, &result.reference);
            files.write(&format!("recovery_{}_n{}.csv", e.scheme, e.n_matrix), &recovery_csv(series, Some(&norms.e1)))?;
        }
    }
    RunManifest {
        command: "sweep",
        config: to_json(&cfg),
        scheme: None,
        grid: None,
        newton: None,
        wall_time_s: started.elapsed().as_secs_f64(),
        files: files.files.clone(),
    }
    .write(&files.dir)?;
    Ok(files.dir)
}

/// Matrix curves in the plotting units of the flux-surface figures:
/// pressures in psi, unit viscosities and permeability, no gravity.
fn plotting_matrix(relperm: RelPerm) -> Result<RockRegion> {
    let rock = fracflow::config::RockConfig::default();
    let kr = match relperm {
        RelPerm::Quadratic => RelPermCurve::quadratic(),
        RelPerm::Cubic => RelPermCurve::cubic(),
    };
    RockRegion::new(
        RegionKind::Matrix,
        kr,
        kr,
        CapillaryCurve::Matrix(fit_pc_bounds(rock.entry_pressure_psi, rock.theta, rock.pc_max_psi, rock.pc_min_psi)?),
        rock.matrix_porosity,
        1.0,
        Fluids::new(1.0, 1.0, 1000.0, 800.0, 0.0)?,
    )
}

pub fn flux_surface(scheme: &str, ut: f64, grid: usize, trans: f64, relperm: RelPerm, out: Option<PathBuf>) -> Result<PathBuf> {
    let scheme: Scheme = scheme.parse()?;
    if grid < 2 {
        return Err(Error::Config(format!("--grid must be at least 2, got {grid}")));
    }
    if !ut.is_finite() || !(trans > 0.0) {
        return Err(Error::Config(format!("need finite --ut and positive --trans, got {ut} and {trans}")));
    }
    let region = plotting_matrix(relperm)?;
    let started = Instant::now();
    let mut files = Outputs::new(resolve(out, "flux-surface"))?;
    let mut text = String::from("s_left,s_right,f_w,f_n,countercurrent\n");
    for r in surface(scheme, ut, trans, &region, grid) {
        text.push_str(&format!("{},{},{},{},{}\n", fmt(r.s_left), fmt(r.s_right), fmt(r.f_w), fmt(r.f_n), r.countercurrent as u8));
    }
    files.write(&format!("flux_surface_{scheme}.csv"), &text)?;
    RunManifest {
        command: "flux-surface",
        config: serde_json::json!({ "scheme": scheme.as_str(), "u_t": ut, "grid": grid, "trans": trans, "relperm": format!("{relperm:?}").to_lowercase() }),
        scheme: Some(scheme.to_string()),
        grid: None,
        newton: None,
        wall_time_s: started.elapsed().as_secs_f64(),
        files: files.files.clone(),
    }
    .write(&files.dir)?;
    Ok(files.dir)
}

/// Columns of a `profile_*.csv` file by header name.
fn read_profile(path: &Path) -> Result<HashMap<String, Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read profile '{}': {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Config(format!("profile '{}' is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut cols: HashMap<String, Vec<String>> = header.iter().map(|h| (h.clone(), Vec::new())).collect();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::Config(format!("profile '{}': ragged row '{line}'", path.display())));
        }
        for (h, c) in header.iter().zip(cells) {
            cols.get_mut(h).expect("header column").push(c.to_string());
        }
    }
    Ok(cols)
}

fn numeric(cols: &HashMap<String, Vec<String>>, name: &str) -> Result<Vec<f64>> {
    cols.get(name)
        .ok_or_else(|| Error::Config(format!("profile has no '{name}' column")))?
        .iter()
        .map(|v| v.parse::<f64>().map_err(|e| Error::Config(format!("column '{name}': {e}"))))
        .collect()
}

pub fn truncation(run_dir: &Path, lo: f64, hi: f64, out: Option<PathBuf>) -> Result<PathBuf> {
    if !(lo < hi) {
        return Err(Error::Config(format!("empty window [{lo}, {hi}]")));
    }
    let cfg = ScenarioConfig::from_path(&run_dir.join("config.toml"))?;
    let cols = read_profile(&run_dir.join("profile_final.csv"))?;
    let (x, s) = (numeric(&cols, "x_m")?, numeric(&cols, "s_w")?);
    let regions = cols.get("region").ok_or_else(|| Error::Config("profile has no 'region' column".into()))?;
    let keep: Vec<usize> = (0..x.len()).filter(|&i| regions[i] == RegionKind::Matrix.as_str()).collect();
    let (xm, sm): (Vec<f64>, Vec<f64>) = keep.iter().map(|&i| (x[i], s[i])).unzip();

    let (matrix, _) = build_regions(&cfg)?;
    // Total Darcy velocity in the matrix: whatever the injector pushes through.
    let scenario = Scenario::build(&cfg)?;
    let rate: f64 = scenario
        .model
        .wells
        .iter()
        .filter_map(|w| if let Well::RateInjector { rate, .. } = w { Some(*rate) } else { None })
        .sum();
    let u = rate / cfg.geometry.area_m2;
    let length = cfg.geometry.length_m;
    let profile = truncation_terms(&xm, &sm, u, matrix.permeability(), &matrix)?.window(lo * length, hi * length);
    if profile.x.is_empty() {
        return Err(Error::Analysis(format!("no matrix cells with x / L in [{lo}, {hi}]")));
    }

    let started = Instant::now();
    let mut files = Outputs::new(out.unwrap_or_else(|| run_dir.to_path_buf()))?;
    let rows = (0..profile.x.len()).map(|i| {
        vec![
            profile.x[i],
            profile.x[i] / length,
            profile.saturation[i],
            profile.e_v[i],
            profile.e_c_ihu[i],
            profile.e_c_ppu[i],
            profile.e_vc_ihu[i],
            profile.e_vc_ppu[i],
        ]
    });
    files.write("truncation.csv", &csv_table(&["x_m", "x_d", "s_w", "e_v", "e_c_ihu", "e_c_ppu", "e_vc_ihu", "e_vc_ppu"], rows))?;
    // A run directory already holds the run's manifest.
    if files.dir != run_dir {
        RunManifest {
            command: "truncation",
            config: to_json(&cfg),
            scheme: None,
            grid: None,
            newton: None,
            wall_time_s: started.elapsed().as_secs_f64(),
            files: files.files.clone(),
        }
        .write(&files.dir)?;
    }
    Ok(files.dir)
}

pub fn curves(region: Region, config: Option<&Path>, relperm: Option<RelPerm>, samples: usize, out: Option<PathBuf>) -> Result<PathBuf> {
    if samples < 2 {
        return Err(Error::Config(format!("--samples must be at least 2, got {samples}")));
    }
    let mut cfg = match config {
        Some(p) => ScenarioConfig::from_path(p)?,
        None => ScenarioConfig::spontaneous(),
    };
    if let Some(r) = relperm {
        cfg.relperm = match r {
            RelPerm::Quadratic => RelPermSet::Quadratic,
            RelPerm::Cubic => RelPermSet::Cubic,
        };
    }
    let (matrix, fracture) = build_regions(&cfg)?;
    let (rock, name) = match region {
        Region::Matrix => (&matrix, "matrix"),
        Region::Fracture => (&fracture, "fracture"),
    };
    let started = Instant::now();
    let mut rows = Vec::with_capacity(samples);
    for k in 0..samples {
        let s = k as f64 / (samples - 1) as f64;
        let (krw, _) = rock.relperm_w().eval(s)?;
        let (krn, _) = rock.relperm_n().eval(1.0 - s)?;
        let (pc, dpc) = rock.pc(s);
        let (d, _) = rock.capillary_diffusion(s)?;
        rows.push(vec![s, krw, krn, pc / PSI, dpc / PSI, d]);
    }
    let mut files = Outputs::new(resolve(out, "curves"))?;
    files.write(&format!("curves_{name}.csv"), &csv_table(&["s_w", "krw", "krn", "pc_psi", "dpc_ds_psi", "diffusion_m2_s"], rows))?;
    RunManifest {
        command: "curves",
        config: to_json(&cfg),
        scheme: None,
        grid: None,
        newton: None,
        wall_time_s: started.elapsed().as_secs_f64(),
        files: files.files.clone(),
    }
    .write(&files.dir)?;
    Ok(files.dir)
}

pub fn grid_dump(config: &Path, out: Option<PathBuf>) -> Result<PathBuf> {
    let cfg = ScenarioConfig::from_path(config)?;
    let scenario = Scenario::build(&cfg)?;
    let mut files = Outputs::new(resolve(out, &format!("{}-grid", config_name(&cfg, config))))?;
    files.write("grid.csv", &scenario.model.grid.to_csv())?;
    Ok(files.dir)
}
