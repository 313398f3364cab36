//! Shared fixtures for the criterion benches.

use sesans_core::{GratingSpec, InstrumentConfig, PhaseShift, WavePacketSpec};

/// The measured grating, a 2 MHz instrument and the default 20401-point sweep.
pub fn reference_setup() -> (GratingSpec, InstrumentConfig, Vec<f64>) {
    let grid = sesans_core::config::SweepSpec::default().grid();
    (GratingSpec::silicon_2um(), InstrumentConfig::larmor(2.0e6), grid)
}

/// Full wall phase used by the oracle benches.
pub const PI_PHASE: PhaseShift = PhaseShift(std::f64::consts::PI);

pub fn packet(delta_nm: f64) -> WavePacketSpec {
    WavePacketSpec::gaussian(delta_nm)
}
