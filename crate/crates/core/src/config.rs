//! TOML run files and the built-in presets.
//!
//! Every key is optional and falls back to the measured 2 µm silicon grating
//! on a 2 MHz Larmor-type instrument. Top-level keys precede the tables:
//!
//! ```toml
//! tilt_rad = 0.13962634          # grating channels inclined to the encoding direction
//! outputs = ["ideal_tof", "smeared", "background"]
//!
//! [grating]
//! a_nm = 720.0                   # half wall width
//! b_nm = 1280.0                  # period is a + b
//! depth_nm = 10000.0
//! sld_per_nm2 = 2.06e-4
//! n_periods = 64
//!
//! [instrument]
//! rf_frequency_hz = 2.0e6
//! field_angle_rad = 0.785398163
//! arm_length_m = 1.0             # used for xi0 when xi0_per_nm is absent
//! xi0_per_nm = 10111.1           # overrides the value derived from the above
//! lambda_band_nm = [0.22, 1.61]
//! tof_bin_nm = 0.0025
//!
//! [resolution]
//! delta_theta_rad = 0.75e-3
//! delta_j_nm = 10.0
//! delta_b_nm = 1.0e-3
//! a_lambda_nm = 3.33e-4
//! b_lambda = 1.01e-4
//!
//! [packet]
//! delta_nm = "infinite"          # or a width in nm
//! k0_per_nm = [0.0, 0.0, 12.566]
//!
//! [beam]
//! width_nm = 4.0e6
//! n_impact_samples = 32
//!
//! [sweep]
//! xi_min_nm = 500.0
//! xi_max_nm = 26000.0
//! n_points = 20401
//!
//! [oracle]
//! n_points = 48                  # sweep points evaluated by oracle curves
//! grid_scale = 1.0
//! n_sigma = 8.0
//! n_k = 1024
//! n_orders = 2048
//! tolerance = 5.0e-3
//! phase_rad = 3.14159            # optional; default is the TOF phase at each point
//! ```

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grating::GratingSpec;
use crate::instrument::{spin_echo_constant, InstrumentConfig, ResolutionParams};
use crate::models::WavePacketSpec;
use crate::oracle::{BeamProfile, QuadratureGrid};
use crate::run::CurveKind;

/// Uniform grid of spin echo lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub xi_min_nm: f64,
    pub xi_max_nm: f64,
    pub n_points: usize,
}

impl Default for SweepSpec {
    /// 0.5–26 µm at 1.25 nm spacing, which lands on every multiple of 2 µm.
    fn default() -> Self {
        SweepSpec {
            xi_min_nm: 500.0,
            xi_max_nm: 26_000.0,
            n_points: 20_401,
        }
    }
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<f64> {
        linspace(self.xi_min_nm, self.xi_max_nm, self.n_points)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_points < 2 {
            out.push(format!("sweep.n_points must be >= 2 (got {})", self.n_points));
        }
        if !(self.xi_min_nm > 0.0 && self.xi_min_nm < self.xi_max_nm && self.xi_max_nm.is_finite()) {
            out.push(format!(
                "sweep must satisfy 0 < xi_min_nm < xi_max_nm (got {}, {})",
                self.xi_min_nm, self.xi_max_nm
            ));
        }
        out
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Density and sampling of oracle curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    pub n_points: usize,
    pub grid_scale: f64,
    pub n_sigma: f64,
    pub n_k: usize,
    pub n_orders: usize,
    pub tolerance: f64,
    pub phase_rad: Option<f64>,
}

impl Default for OracleSettings {
    fn default() -> Self {
        let g = QuadratureGrid::default();
        OracleSettings {
            n_points: 48,
            grid_scale: 1.0,
            n_sigma: g.n_sigma,
            n_k: g.n_k,
            n_orders: g.n_orders,
            tolerance: g.tolerance,
            phase_rad: None,
        }
    }
}

impl OracleSettings {
    /// Quadrature grid with `grid_scale` applied.
    pub fn grid(&self) -> QuadratureGrid {
        let base = QuadratureGrid {
            n_sigma: self.n_sigma,
            n_k: self.n_k,
            n_orders: self.n_orders,
            tolerance: self.tolerance,
        };
        if self.grid_scale == 1.0 {
            base
        } else {
            base.scaled(self.grid_scale)
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_points < 2 {
            out.push(format!("oracle.n_points must be >= 2 (got {})", self.n_points));
        }
        if !(self.grid_scale > 0.0 && self.grid_scale.is_finite()) {
            out.push(format!("oracle.grid_scale must be > 0 (got {})", self.grid_scale));
        }
        out.extend(
            QuadratureGrid {
                n_sigma: self.n_sigma,
                n_k: self.n_k,
                n_orders: self.n_orders,
                tolerance: self.tolerance,
            }
            .violations(),
        );
        out
    }
}

/// Everything needed for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grating: GratingSpec,
    pub instrument: InstrumentConfig,
    pub resolution: ResolutionParams,
    pub packet: WavePacketSpec,
    pub beam: BeamProfile,
    pub sweep: SweepSpec,
    pub tilt_rad: Option<f64>,
    pub outputs: Vec<CurveKind>,
    pub oracle: OracleSettings,
    /// Written as a comment line ahead of every CSV header.
    pub provenance: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grating: GratingSpec::default(),
            instrument: InstrumentConfig::default(),
            resolution: ResolutionParams::default(),
            packet: WavePacketSpec::default(),
            beam: BeamProfile::default(),
            sweep: SweepSpec::default(),
            tilt_rad: None,
            outputs: default_outputs(),
            oracle: OracleSettings::default(),
            provenance: None,
        }
    }
}

fn default_outputs() -> Vec<CurveKind> {
    vec![CurveKind::IdealTof, CurveKind::Smeared, CurveKind::Background]
}

impl RunConfig {
    /// Grating as seen along the encoding direction.
    pub fn effective_grating(&self) -> Result<GratingSpec> {
        match self.tilt_rad {
            Some(t) => self.grating.effective(t),
            None => Ok(self.grating.clone()),
        }
    }

    /// Every violated invariant across all sections.
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.grating.violations();
        out.extend(self.instrument.violations());
        out.extend(self.resolution.violations());
        out.extend(self.packet.violations());
        out.extend(self.beam.violations());
        out.extend(self.sweep.violations());
        out.extend(self.oracle.violations());
        if let Some(t) = self.tilt_rad {
            if !(t > 0.0 && t <= FRAC_PI_2) {
                out.push(format!("tilt_rad must lie in (0, π/2] (got {t})"));
            }
        }
        if self.outputs.is_empty() {
            out.push("outputs must name at least one curve".to_string());
        }
        let (lo, hi) = self.instrument.xi_band();
        if lo.is_finite() && hi.is_finite() && self.sweep.xi_min_nm < self.sweep.xi_max_nm {
            let slack = 1e-12 * hi;
            if self.sweep.xi_min_nm < lo - slack || self.sweep.xi_max_nm > hi + slack {
                out.push(format!(
                    "sweep [{}, {}] nm exceeds the band's spin echo range [{lo:.6}, {hi:.6}] nm",
                    self.sweep.xi_min_nm, self.sweep.xi_max_nm
                ));
            }
        }
        out
    }

    pub fn validate(self) -> Result<Self> {
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// Instrument table as written; derived quantities are filled in afterwards.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstrumentSection {
    xi0_per_nm: Option<f64>,
    rf_frequency_hz: Option<f64>,
    arm_length_m: Option<f64>,
    field_angle_rad: Option<f64>,
    lambda_band_nm: Option<(f64, f64)>,
    tof_bin_nm: Option<f64>,
}

impl InstrumentSection {
    fn resolve(self) -> InstrumentConfig {
        let f = self.rf_frequency_hz.unwrap_or(2.0e6);
        let theta = self.field_angle_rad.unwrap_or(FRAC_PI_4);
        let base = if f > 0.0 {
            InstrumentConfig::larmor(f)
        } else {
            InstrumentConfig::default()
        };
        let xi0 = self.xi0_per_nm.unwrap_or_else(|| {
            spin_echo_constant(f, self.arm_length_m.unwrap_or(1.0), theta).unwrap_or(f64::NAN)
        });
        InstrumentConfig {
            xi0_per_nm: xi0,
            rf_frequency_hz: f,
            arm_length_m: self.arm_length_m,
            field_angle_rad: theta,
            lambda_band_nm: self.lambda_band_nm.unwrap_or(base.lambda_band_nm),
            tof_bin_nm: self.tof_bin_nm.unwrap_or(base.tof_bin_nm),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    tilt_rad: Option<f64>,
    outputs: Option<Vec<CurveKind>>,
    #[serde(default)]
    grating: GratingSpec,
    #[serde(default)]
    instrument: InstrumentSection,
    #[serde(default)]
    resolution: ResolutionParams,
    #[serde(default)]
    packet: WavePacketSpec,
    #[serde(default)]
    beam: BeamProfile,
    #[serde(default)]
    sweep: SweepSpec,
    #[serde(default)]
    oracle: OracleSettings,
}

/// Parses and validates a run file's text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_column(text, s.start))
            .unwrap_or((0, 0));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let mut outputs = file.outputs.unwrap_or_else(default_outputs);
    outputs.sort();
    outputs.dedup();
    RunConfig {
        grating: file.grating,
        instrument: file.instrument.resolve(),
        resolution: file.resolution,
        packet: file.packet,
        beam: file.beam,
        sweep: file.sweep,
        tilt_rad: file.tilt_rad,
        outputs,
        oracle: file.oracle,
        provenance: None,
    }
    .validate()
}

/// Reads, parses and validates a run file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// 1-based line and column of byte `offset`.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, column)
}

/// Built-in configurations reproducing the published figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PresetId {
    Fig2aIdeal,
    Fig2bDamped,
    Fig3a2Mhz,
    Fig3b3Mhz,
    Fig4Tilted8Deg,
    Fig4Tilted5Deg,
}

impl PresetId {
    pub const ALL: [PresetId; 6] = [
        PresetId::Fig2aIdeal,
        PresetId::Fig2bDamped,
        PresetId::Fig3a2Mhz,
        PresetId::Fig3b3Mhz,
        PresetId::Fig4Tilted8Deg,
        PresetId::Fig4Tilted5Deg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetId::Fig2aIdeal => "fig2a_ideal",
            PresetId::Fig2bDamped => "fig2b_damped",
            PresetId::Fig3a2Mhz => "fig3a_2MHz",
            PresetId::Fig3b3Mhz => "fig3b_3MHz",
            PresetId::Fig4Tilted8Deg => "fig4_tilted_8deg",
            PresetId::Fig4Tilted5Deg => "fig4_tilted_5deg",
        }
    }

    fn rf_frequency_hz(self) -> f64 {
        match self {
            PresetId::Fig3b3Mhz | PresetId::Fig4Tilted5Deg => 3.0e6,
            _ => 2.0e6,
        }
    }

    fn tilt_deg(self) -> Option<f64> {
        match self {
            PresetId::Fig4Tilted8Deg => Some(8.0),
            PresetId::Fig4Tilted5Deg => Some(5.0),
            _ => None,
        }
    }

    pub fn config(self) -> RunConfig {
        use CurveKind::*;
        let instrument = InstrumentConfig::larmor(self.rf_frequency_hz());
        let (packet, outputs) = match self {
            PresetId::Fig2aIdeal => (WavePacketSpec::plane_wave(), vec![IdealTof, Background]),
            PresetId::Fig2bDamped => (
                WavePacketSpec::gaussian(60_000.0),
                vec![IdealTof, DampedSemiclassical, Background],
            ),
            _ => (
                WavePacketSpec::plane_wave(),
                vec![IdealTof, Smeared, Background, ResolutionEnvelope],
            ),
        };
        let tilt_rad = self.tilt_deg().map(f64::to_radians);
        let provenance = format!(
            "preset {}: silicon grating a=720 nm b=1280 nm h=10000 nm rho=2.06e-4 nm^-2{}; \
             f={} MHz L=1 m theta0=45 deg xi0={:.1} nm/nm^2 band=[{}, {}] nm; \
             resolution dtheta=0.75 mrad dJ=10 nm db=1e-3 nm a_lambda=3.33e-4 nm b_lambda=1.01e-4; \
             delta={}; sweep 0.5-26 um (reconstructed)",
            self.name(),
            self.tilt_deg().map(|t| format!(" tilted {t} deg")).unwrap_or_default(),
            self.rf_frequency_hz() / 1e6,
            instrument.xi0_per_nm,
            instrument.lambda_band_nm.0,
            instrument.lambda_band_nm.1,
            match packet.delta_nm.finite_nm() {
                Some(d) => format!("{d} nm"),
                None => "infinite".to_string(),
            },
        );
        RunConfig {
            instrument,
            packet,
            tilt_rad,
            outputs,
            provenance: Some(provenance),
            ..RunConfig::default()
        }
    }
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetId::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = PresetId::ALL.iter().map(|p| p.name()).collect();
                Error::InvalidParameter(format!("unknown preset {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empty_file_is_the_measured_grating() {
        let c = parse_config("").unwrap();
        assert_eq!(c.grating.period(), 2000.0);
        assert_eq!(c.grating.channel_width(), 560.0);
        assert_eq!(c.grating.depth_nm, 1e4);
        assert_eq!(c.grating.sld_per_nm2, 2.06e-4);
        assert_abs_diff_eq!(c.instrument.xi0_per_nm, 10_111.0, epsilon = 1.0);
    }

    #[test]
    fn wall_wider_than_period_names_constraint() {
        let err = parse_config("[grating]\na_nm = 900.0\nb_nm = 800.0\n").unwrap_err();
        match err {
            Error::Validation(v) => assert!(v.iter().any(|m| m.contains("b > a")), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn xi0_taken_directly_without_arm_length() {
        let c = parse_config("[instrument]\nxi0_per_nm = 12000.0\nlambda_band_nm = [0.2, 1.5]\n").unwrap();
        assert_eq!(c.instrument.xi0_per_nm, 12_000.0);
        assert_eq!(c.instrument.arm_length_m, None);
        let c = parse_config("[instrument]\nrf_frequency_hz = 3.0e6\narm_length_m = 1.0\n").unwrap();
        assert_abs_diff_eq!(c.instrument.xi0_per_nm, 15_166.7, epsilon = 1.0);
    }

    #[test]
    fn parse_error_has_position() {
        match parse_config("[grating]\na_nm = 720.0\nb_nm = = 3\n").unwrap_err() {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column >= 6);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("[grating]\nwidth = 3.0\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn all_violations_reported_together() {
        let text = "outputs = []\n[grating]\na_nm = 800.0\nb_nm = 700.0\n[sweep]\nn_points = 1\n[resolution]\ndelta_j_nm = -1.0\n";
        match parse_config(text).unwrap_err() {
            Error::Validation(v) => assert!(v.len() >= 4, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn packet_and_outputs_parse() {
        let c = parse_config(
            "outputs = [\"smeared\", \"ideal_tof\", \"smeared\"]\n[packet]\ndelta_nm = 60000.0\n",
        )
        .unwrap();
        assert_eq!(c.packet.delta_nm.finite_nm(), Some(60_000.0));
        assert_eq!(c.outputs, vec![CurveKind::IdealTof, CurveKind::Smeared]);
        assert!(parse_config("outputs = [\"nonsense\"]\n").is_err());
    }

    #[test]
    fn sweep_outside_band_is_rejected() {
        let err = parse_config("[sweep]\nxi_max_nm = 40000.0\n").unwrap_err();
        assert!(err.to_string().contains("band"));
    }

    #[test]
    fn presets_are_valid_and_round_trip_names() {
        for p in PresetId::ALL {
            let c = p.config();
            assert!(c.violations().is_empty(), "{p}: {:?}", c.violations());
            assert!(c.provenance.as_deref().unwrap().contains(p.name()));
            assert_eq!(p.name().parse::<PresetId>().unwrap(), p);
        }
        assert!("fig9".parse::<PresetId>().is_err());
        let t = PresetId::Fig4Tilted8Deg.config();
        assert_abs_diff_eq!(t.effective_grating().unwrap().period(), 14_370.6, epsilon = 0.05);
    }

    #[test]
    fn sweep_grid_hits_period_multiples() {
        let g = SweepSpec::default().grid();
        assert_eq!(g.len(), 20_401);
        assert_eq!(g[0], 500.0);
        assert_eq!(*g.last().unwrap(), 26_000.0);
        for n in 1..=12 {
            let x = 2000.0 * n as f64;
            assert!(g.iter().any(|&v| (v - x).abs() < 1e-9));
        }
    }
}
