//! Benchmark fixtures.

use std::f64::consts::PI;

use adiascope::{cp_scenario, drive_scenario, CpScenario, DriveKind, DriveScenario, Result, Scenario};

/// CP sequence at `theta = pi/6` with `n` pulses.
pub fn cp(n: usize) -> Result<Scenario> {
    cp_scenario(&CpScenario::new(PI / 6.0, n))
}

/// Continuous drive at `theta = pi/2`, `T = 1`, `omega = 2 pi`.
pub fn drive(kind: DriveKind, nprime: f64) -> Result<Scenario> {
    drive_scenario(&DriveScenario::with_nprime(kind, nprime, PI / 2.0))
}
