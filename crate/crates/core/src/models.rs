//! Closed-form echo polarization for the two competing pictures.
//!
//! In the two-path picture the normalized echo polarization is the grating
//! autocorrelation, a three-branch periodic function of `ξ` that does not
//! depend on the wave-packet width. The single-path picture multiplies the
//! same curve by `G(ξ, Δ) = exp(-ξ²/2Δ²)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grating::{GratingSpec, PhaseShift};
use crate::instrument::InstrumentConfig;

/// FWHM of a Gaussian in units of its standard deviation, `2√(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Transverse coherence width of the incident packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coherence {
    Finite(f64),
    Infinite(InfiniteTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfiniteTag {
    Infinite,
}

impl Coherence {
    pub const INFINITE: Coherence = Coherence::Infinite(InfiniteTag::Infinite);

    pub fn finite_nm(self) -> Option<f64> {
        match self {
            Coherence::Finite(d) => Some(d),
            Coherence::Infinite(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WavePacketSpec {
    /// `Δ` of the Gaussian momentum profile `exp(-Δ²(k_y - k0_y)²/4)`.
    pub delta_nm: Coherence,
    /// Mean wave vector `(k0_x, k0_y, k0_z)` in nm⁻¹.
    #[serde(default = "WavePacketSpec::default_k0")]
    pub k0_per_nm: [f64; 3],
}

impl Default for WavePacketSpec {
    fn default() -> Self {
        WavePacketSpec::plane_wave()
    }
}

impl WavePacketSpec {
    fn default_k0() -> [f64; 3] {
        [0.0, 0.0, 2.0 * PI / 0.5]
    }

    pub fn plane_wave() -> Self {
        WavePacketSpec {
            delta_nm: Coherence::INFINITE,
            k0_per_nm: Self::default_k0(),
        }
    }

    /// Packet of width `delta_nm` travelling along z at 0.5 nm.
    pub fn gaussian(delta_nm: f64) -> Self {
        WavePacketSpec {
            delta_nm: Coherence::Finite(delta_nm),
            k0_per_nm: Self::default_k0(),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Coherence::Finite(d) = self.delta_nm {
            if !(d.is_finite() && d > 0.0) {
                out.push(format!("packet.delta_nm must be > 0 or \"infinite\" (got {d})"));
            }
        }
        if !(self.k0_per_nm[2] > 0.0) {
            out.push(format!("packet.k0_per_nm[2] must be > 0 (got {})", self.k0_per_nm[2]));
        }
        if self.k0_per_nm[1] != 0.0 {
            out.push("packet.k0_per_nm[1] must be 0 (beam along the optic axis)".to_string());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoSample {
    pub xi_nm: f64,
    pub lambda_nm: Option<f64>,
    pub polarization: f64,
}

/// Sampled `P/P0` against spin echo length, `ξ` strictly increasing.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EchoPattern {
    samples: Vec<EchoSample>,
}

impl EchoPattern {
    pub fn new(samples: Vec<EchoSample>) -> Result<Self> {
        if let Some(w) = samples.windows(2).find(|w| !(w[1].xi_nm > w[0].xi_nm)) {
            return Err(Error::InvalidParameter(format!(
                "echo pattern xi must be strictly increasing ({} then {})",
                w[0].xi_nm, w[1].xi_nm
            )));
        }
        if let Some(s) = samples
            .iter()
            .find(|s| !(s.polarization.abs() <= 1.0 + 1e-9))
        {
            return Err(Error::InvalidParameter(format!(
                "polarization {} at xi = {} nm is outside [-1, 1]",
                s.polarization, s.xi_nm
            )));
        }
        Ok(EchoPattern { samples })
    }

    /// Pattern from parallel slices, without wavelengths.
    pub fn from_xy(xi_nm: &[f64], polarization: &[f64]) -> Result<Self> {
        assert_eq!(xi_nm.len(), polarization.len());
        Self::new(
            xi_nm
                .iter()
                .zip(polarization)
                .map(|(&xi_nm, &polarization)| EchoSample {
                    xi_nm,
                    lambda_nm: None,
                    polarization,
                })
                .collect(),
        )
    }

    pub fn samples(&self) -> &[EchoSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn xi(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.xi_nm).collect()
    }

    pub fn polarization(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.polarization).collect()
    }

    pub fn xi_range(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.xi_nm, self.samples.last()?.xi_nm))
    }

    /// Same abscissae and wavelengths, new ordinates.
    pub(crate) fn with_polarization(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.samples
                .iter()
                .zip(values)
                .map(|(s, polarization)| EchoSample { polarization, ..*s })
                .collect(),
        )
    }
}

/// Plane-wave echo polarization, the three-branch closed form.
pub fn plane_wave_polarization(g: &GratingSpec, phi: PhaseShift, xi_nm: f64) -> f64 {
    let p = g.period();
    let x = xi_nm.abs().rem_euclid(p);
    let (lo, hi) = g.plateau_edges();
    let slope = 2.0 * phi.contrast() / p;
    if x <= lo {
        1.0 - slope * x
    } else if x <= hi {
        1.0 - slope * lo
    } else {
        1.0 + slope * (x - p)
    }
}

/// Single-path damping `G(ξ, Δ) = exp(-ξ²/2Δ²)`.
pub fn damping(xi_nm: f64, packet: &WavePacketSpec) -> f64 {
    match packet.delta_nm {
        Coherence::Infinite(_) => 1.0,
        Coherence::Finite(d) => (-xi_nm * xi_nm / (2.0 * d * d)).exp(),
    }
}

/// Single-path echo polarization: damping times the plane-wave result.
pub fn semiclassical_polarization(
    g: &GratingSpec,
    phi: PhaseShift,
    xi_nm: f64,
    packet: &WavePacketSpec,
) -> f64 {
    damping(xi_nm, packet) * plane_wave_polarization(g, phi, xi_nm)
}

/// Diffraction-order sum `Σ_{|n| ≤ n_max} |c_n|² cos(2πnξ/p)`.
///
/// Normalised by the exact total diffracted power, which is 1 for a pure
/// phase object; the truncated power converges only as `1/n_max`.
pub fn fourier_series_polarization(
    g: &GratingSpec,
    phi: PhaseShift,
    xi_nm: f64,
    n_max: usize,
) -> f64 {
    let p = g.period();
    let n_max = n_max.max(1) as i64;
    let mut sum = g.fourier_coefficient(phi, 0).norm_sqr();
    // pair ±n, summed from the small tail upwards
    for n in (1..=n_max).rev() {
        let w = g.fourier_coefficient(phi, n).norm_sqr() + g.fourier_coefficient(phi, -n).norm_sqr();
        sum += w * (2.0 * PI * n as f64 * xi_nm / p).cos();
    }
    sum
}

/// Wall phase at wavelength `lambda_nm`, `φ = ρ h λ`.
pub fn tof_phase(g: &GratingSpec, lambda_nm: f64) -> PhaseShift {
    g.phase_at(lambda_nm)
}

/// Resolution-free TOF pattern: each `ξ` carries its own wavelength and phase.
pub fn tof_pattern(g: &GratingSpec, inst: &InstrumentConfig, xi_grid: &[f64]) -> Result<EchoPattern> {
    damped_tof_pattern(g, inst, &WavePacketSpec::plane_wave(), xi_grid)
}

/// TOF pattern in the single-path picture with packet width `packet.delta_nm`.
pub fn damped_tof_pattern(
    g: &GratingSpec,
    inst: &InstrumentConfig,
    packet: &WavePacketSpec,
    xi_grid: &[f64],
) -> Result<EchoPattern> {
    let samples = xi_grid
        .iter()
        .map(|&xi| {
            let lambda = inst.lambda_in_band(xi)?;
            Ok(EchoSample {
                xi_nm: xi,
                lambda_nm: Some(lambda),
                polarization: semiclassical_polarization(g, tof_phase(g, lambda), xi, packet),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EchoPattern::new(samples)
}

/// Sloping TOF background: the plateau of the plane-wave form at the local phase,
/// `1 - (2 min(2a, b-a)/p)(1 - cos(ρ h √(ξ/ξ0)))`.
pub fn background(g: &GratingSpec, inst: &InstrumentConfig, xi_nm: f64) -> Result<f64> {
    let lambda = inst.lambda_in_band(xi_nm)?;
    Ok(background_at_phase(g, tof_phase(g, lambda)))
}

pub(crate) fn background_at_phase(g: &GratingSpec, phi: PhaseShift) -> f64 {
    let (lo, _) = g.plateau_edges();
    1.0 - 2.0 * lo / g.period() * phi.contrast()
}

/// Gaussian `σ` for a given full width at half maximum.
pub fn sigma_from_fwhm(fwhm_nm: f64) -> f64 {
    fwhm_nm / FWHM_PER_SIGMA
}

/// Damping the single-path picture still predicts at `xi_nm` for a packet
/// whose FWHM is `fwhm_nm`.
pub fn single_path_residual_damping(fwhm_nm: f64, xi_nm: f64) -> f64 {
    damping(xi_nm, &WavePacketSpec::gaussian(sigma_from_fwhm(fwhm_nm)))
}
