//! Spin-echo small-angle neutron scattering (SESANS) from periodic phase gratings.
//!
//! The crate carries two competing descriptions of the echo polarization:
//!
//! * the single-path Larmor picture, where a finite transverse coherence
//!   width `Δ` multiplies the grating autocorrelation by a Gaussian damping
//!   factor, and
//! * the two-path picture, where the mode-entangled spin components sample
//!   the grating at points a spin echo length apart and the result does not
//!   depend on `Δ` at all.
//!
//! [`models`] holds the closed forms, [`oracle`] recomputes both from Gaussian
//! wave packets on a momentum lattice, and [`instrument`] adds the
//! time-of-flight kinematics, resolution smearing and peak analysis needed to
//! turn them into measured-looking curves. [`config`], [`run`] and [`export`]
//! wire everything to TOML run files and CSV output.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod export;
pub mod grating;
pub mod instrument;
pub mod models;
pub mod oracle;
pub mod run;

pub use config::{load_config, PresetId, RunConfig};
pub use error::{Error, Result};
pub use grating::{GratingSpec, PhaseShift};
pub use instrument::{InstrumentConfig, PeakEstimate, ResolutionParams};
pub use models::{Coherence, EchoPattern, EchoSample, WavePacketSpec};
pub use oracle::{BeamProfile, OracleCase, OracleEstimate, QuadratureGrid, Spinor};
pub use run::{run, CurveKind, RunResults};
