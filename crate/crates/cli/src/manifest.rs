use std::path::Path;

use fracflow::grid::Grid1D;
use fracflow::output::write_atomic;
use fracflow::solver::RunStats;
use fracflow::{Error, RegionKind, Result};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct GridSummary {
    pub cells: usize,
    pub matrix_cells: usize,
    pub fracture_cells: usize,
    pub length_m: f64,
    pub region_boundaries: usize,
}

impl GridSummary {
    pub fn of(grid: &Grid1D) -> Self {
        let first = grid.faces.first().map_or(0.0, |f| f.position);
        let last = grid.faces.last().map_or(0.0, |f| f.position);
        GridSummary {
            cells: grid.n_cells(),
            matrix_cells: grid.cells_in(RegionKind::Matrix).count(),
            fracture_cells: grid.cells_in(RegionKind::Fracture).count(),
            length_m: last - first,
            region_boundaries: grid.region_boundaries().count(),
        }
    }
}

/// Written last, so its presence marks a complete output directory. The
/// wall time is the only non-deterministic field.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config: serde_json::Value,
    pub scheme: Option<String>,
    pub grid: Option<GridSummary>,
    pub newton: Option<RunStats>,
    pub wall_time_s: f64,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        write_atomic(&dir.join("manifest.json"), &(text + "\n"))
    }
}
