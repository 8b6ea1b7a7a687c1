//! Field-unit conversion factors. Everything inside the simulator is SI.

/// Pascal per psi.
pub const PSI: f64 = 6894.757;
/// Square metres per millidarcy.
pub const MILLIDARCY: f64 = 9.869233e-16;
/// Pascal-seconds per centipoise.
pub const CENTIPOISE: f64 = 1e-3;
/// Standard gravity, m/s^2.
pub const GRAVITY: f64 = 9.80665;
pub const SECONDS_PER_DAY: f64 = 86_400.0;
