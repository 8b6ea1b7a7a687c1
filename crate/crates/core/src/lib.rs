//! Fully implicit two-phase flow in 1D heterogeneous porous media.
//!
//! Three interface flux schemes are available: phase-potential upwinding
//! (PPU), PPU with discrete interface conditions at rock-region boundaries
//! (PPU-C), and implicit hybrid upwinding with interface conditions (IHU-C).

pub mod analysis;
pub mod banded;
pub mod config;
pub mod error;
pub mod flux;
pub mod grid;
pub mod interface;
pub mod output;
pub mod petrophysics;
pub mod scenarios;
pub mod solver;
pub mod units;

pub use error::{Error, Result};
pub use grid::Grid1D;
pub use petrophysics::{CapillaryCurve, RegionKind, RelPermCurve, RockRegion};
pub use scenarios::Scenario;
pub use solver::{Model, Scheme, SimulationRecord, State};

