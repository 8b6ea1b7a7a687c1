//! Uniform 1D grids with region assignment, depth and static transmissibilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::petrophysics::RegionKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Cell-centre coordinate [m].
    pub center: f64,
    pub dx: f64,
    pub region: RegionKind,
    /// Depth, positive downward [m].
    pub depth: f64,
    /// Pore volume φ·A·dx times any amplification factor [m3].
    pub pore_volume: f64,
    /// Absolute permeability [m2].
    pub permeability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    /// Left cell index; the right cell is `left + 1`.
    pub left: usize,
    pub right: usize,
    /// Face coordinate [m].
    pub position: f64,
    /// Harmonic-average transmissibility [m3].
    pub trans: f64,
    /// One-sided transmissibility of the left half-cell.
    pub trans_left: f64,
    pub trans_right: f64,
    /// `z_left - z_right`.
    pub dz: f64,
    /// `z_left - z_face`.
    pub dz_left: f64,
    /// `z_right - z_face`.
    pub dz_right: f64,
    pub region_boundary: bool,
}

/// A contiguous run of cells in one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub region: RegionKind,
    pub length: f64,
    pub cells: usize,
    pub permeability: f64,
    pub porosity: f64,
    pub pv_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub cells: Vec<Cell>,
    pub faces: Vec<Face>,
    pub area: f64,
    pub length: f64,
    pub tilt_deg: f64,
}

impl Grid1D {
    /// Build a grid from consecutive segments, left to right. Depth decreases
    /// to the right by `sin(tilt)` per metre (updip left to right).
    pub fn from_segments(segments: &[Segment], area: f64, tilt_deg: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Config("grid needs at least one segment".into()));
        }
        if !(area > 0.0) {
            return Err(Error::Config(format!("area must be positive, got {area}")));
        }
        let sin_tilt = tilt_deg.to_radians().sin();
        let mut cells = Vec::new();
        let mut x0 = 0.0;
        for seg in segments {
            if seg.cells == 0 || !(seg.length > 0.0) {
                return Err(Error::Config("segments need at least one cell and positive length".into()));
            }
            if !(seg.permeability > 0.0) || !(seg.porosity > 0.0) || !(seg.pv_multiplier > 0.0) {
                return Err(Error::Config("segment permeability, porosity and pv multiplier must be positive".into()));
            }
            let dx = seg.length / seg.cells as f64;
            for k in 0..seg.cells {
                let center = x0 + (k as f64 + 0.5) * dx;
                cells.push(Cell {
                    center,
                    dx,
                    region: seg.region,
                    depth: -center * sin_tilt,
                    pore_volume: seg.porosity * area * dx * seg.pv_multiplier,
                    permeability: seg.permeability,
                });
            }
            x0 += seg.length;
        }
        let faces = cells
            .windows(2)
            .enumerate()
            .map(|(i, pair)| {
                let (l, r) = (&pair[0], &pair[1]);
                let position = l.center + 0.5 * l.dx;
                let trans_left = l.permeability * area / (0.5 * l.dx);
                let trans_right = r.permeability * area / (0.5 * r.dx);
                let z_face = -position * sin_tilt;
                Face {
                    left: i,
                    right: i + 1,
                    position,
                    trans: 1.0 / (1.0 / trans_left + 1.0 / trans_right),
                    trans_left,
                    trans_right,
                    dz: l.depth - r.depth,
                    dz_left: l.depth - z_face,
                    dz_right: r.depth - z_face,
                    region_boundary: l.region != r.region,
                }
            })
            .collect();
        Ok(Self { cells, faces, area, length: x0, tilt_deg })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn region_boundaries(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| f.region_boundary)
    }

    pub fn cells_in(&self, region: RegionKind) -> impl Iterator<Item = (usize, &Cell)> {
        self.cells.iter().enumerate().filter(move |(_, c)| c.region == region)
    }

    /// CSV dump: one row per cell, then one row per face.
    pub fn to_csv(&self) -> String {
        use crate::output::fmt;
        let mut out = String::from("kind,index,x_m,region,depth_m,dx_m,pore_volume_m3,permeability_md,trans_m3,trans_left_m3,trans_right_m3,dz_m,region_boundary\n");
        let md = crate::units::MILLIDARCY;
        for (i, c) in self.cells.iter().enumerate() {
            out.push_str(&format!(
                "cell,{i},{},{},{},{},{},{},,,,,\n",
                fmt(c.center),
                c.region.as_str(),
                fmt(c.depth),
                fmt(c.dx),
                fmt(c.pore_volume),
                fmt(c.permeability / md)
            ));
        }
        for (i, f) in self.faces.iter().enumerate() {
            out.push_str(&format!(
                "face,{i},{},,,,,,{},{},{},{},{}\n",
                fmt(f.position),
                fmt(f.trans),
                fmt(f.trans_left),
                fmt(f.trans_right),
                fmt(f.dz),
                f.region_boundary as u8
            ));
        }
        out
    }
}

/// Matrix on the left half, fracture on the right half. The fracture pore
/// volume is multiplied by `fracture_pv_multiplier`.
pub fn build_spontaneous_grid(
    n_matrix: usize,
    n_fracture: usize,
    length: f64,
    k_matrix: f64,
    k_fracture: f64,
    porosity: (f64, f64),
    fracture_pv_multiplier: f64,
    area: f64,
) -> Result<Grid1D> {
    if n_matrix == 0 || n_fracture == 0 {
        return Err(Error::Config("spontaneous grid needs at least one matrix and one fracture cell".into()));
    }
    let segments = [
        Segment {
            region: RegionKind::Matrix,
            length: 0.5 * length,
            cells: n_matrix,
            permeability: k_matrix,
            porosity: porosity.0,
            pv_multiplier: 1.0,
        },
        Segment {
            region: RegionKind::Fracture,
            length: 0.5 * length,
            cells: n_fracture,
            permeability: k_fracture,
            porosity: porosity.1,
            pv_multiplier: fracture_pv_multiplier,
        },
    ];
    Grid1D::from_segments(&segments, area, 0.0)
}

/// Fracture quarters on both ends, matrix in the middle half, uniform `dx`.
pub fn build_forced_grid(
    n_matrix: usize,
    length: f64,
    k_matrix: f64,
    k_fracture: f64,
    porosity: (f64, f64),
    tilt_deg: f64,
    area: f64,
) -> Result<Grid1D> {
    if n_matrix < 2 || n_matrix % 2 != 0 {
        return Err(Error::Config(format!("forced grid needs an even matrix cell count >= 2, got {n_matrix}")));
    }
    let fracture = |cells| Segment {
        region: RegionKind::Fracture,
        length: 0.25 * length,
        cells,
        permeability: k_fracture,
        porosity: porosity.1,
        pv_multiplier: 1.0,
    };
    let segments = [
        fracture(n_matrix / 2),
        Segment {
            region: RegionKind::Matrix,
            length: 0.5 * length,
            cells: n_matrix,
            permeability: k_matrix,
            porosity: porosity.0,
            pv_multiplier: 1.0,
        },
        fracture(n_matrix / 2),
    ];
    Grid1D::from_segments(&segments, area, tilt_deg)
}
