//! Evaluation of the curves a [`RunConfig`] asks for.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{linspace, RunConfig};
use crate::error::{Error, Result};
use crate::grating::{GratingSpec, PhaseShift};
use crate::instrument::{convolve_resolution, find_peaks, PeakEstimate};
use crate::models::{self, EchoPattern, EchoSample};
use crate::oracle::OracleCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// Plane-wave TOF pattern.
    IdealTof,
    /// TOF pattern times the single-path damping.
    DampedSemiclassical,
    /// Ideal pattern convolved with the instrumental resolution.
    Smeared,
    /// Sloping plateau under the peaks.
    Background,
    /// Smeared peak maxima, one sample per order.
    ResolutionEnvelope,
    /// Two-path picture from the wave-packet oracle.
    OracleQuantum,
    /// Single-path picture from the wave-packet oracle.
    OracleSemiclassical,
}

impl CurveKind {
    pub const ALL: [CurveKind; 7] = [
        CurveKind::IdealTof,
        CurveKind::DampedSemiclassical,
        CurveKind::Smeared,
        CurveKind::Background,
        CurveKind::ResolutionEnvelope,
        CurveKind::OracleQuantum,
        CurveKind::OracleSemiclassical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CurveKind::IdealTof => "ideal_tof",
            CurveKind::DampedSemiclassical => "damped_semiclassical",
            CurveKind::Smeared => "smeared",
            CurveKind::Background => "background",
            CurveKind::ResolutionEnvelope => "resolution_envelope",
            CurveKind::OracleQuantum => "oracle_quantum",
            CurveKind::OracleSemiclassical => "oracle_semiclassical",
        }
    }

    pub fn is_oracle(self) -> bool {
        matches!(self, CurveKind::OracleQuantum | CurveKind::OracleSemiclassical)
    }

    /// Densely sampled curves whose peaks are tabulated.
    fn has_peaks(self) -> bool {
        matches!(
            self,
            CurveKind::IdealTof | CurveKind::DampedSemiclassical | CurveKind::Smeared
        )
    }
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Curves and peak tables of one run, in [`CurveKind::ALL`] order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunResults {
    pub curves: Vec<(CurveKind, EchoPattern)>,
    pub peaks: Vec<(CurveKind, Vec<PeakEstimate>)>,
    pub warnings: Vec<String>,
    pub provenance: Option<String>,
    /// Grating period along the encoding direction.
    pub period_nm: f64,
}

impl RunResults {
    pub fn curve(&self, kind: CurveKind) -> Option<&EchoPattern> {
        self.curves.iter().find(|(k, _)| *k == kind).map(|(_, p)| p)
    }

    pub fn peaks_of(&self, kind: CurveKind) -> Option<&[PeakEstimate]> {
        self.peaks.iter().find(|(k, _)| *k == kind).map(|(_, p)| p.as_slice())
    }

    /// True when no curve holds a sample.
    pub fn is_empty(&self) -> bool {
        self.curves.iter().all(|(_, p)| p.is_empty())
    }
}

/// Computes every requested curve. Errors name the curve being computed.
pub fn run(config: &RunConfig) -> Result<RunResults> {
    let config = config.clone().validate()?;
    let g = config.effective_grating()?;
    let grid = config.sweep.grid();
    let wanted = |k: CurveKind| config.outputs.contains(&k);

    let mut results = RunResults {
        provenance: config.provenance.clone(),
        period_nm: g.period(),
        ..RunResults::default()
    };

    let needs_ideal = wanted(CurveKind::IdealTof)
        || wanted(CurveKind::Smeared)
        || wanted(CurveKind::ResolutionEnvelope);
    let ideal = if needs_ideal {
        Some(models::tof_pattern(&g, &config.instrument, &grid).map_err(|e| e.in_curve("ideal_tof"))?)
    } else {
        None
    };
    let smeared = match &ideal {
        Some(p) if wanted(CurveKind::Smeared) || wanted(CurveKind::ResolutionEnvelope) => Some(
            convolve_resolution(p, &config.instrument, &config.resolution)
                .map_err(|e| e.in_curve("smeared"))?,
        ),
        _ => None,
    };

    for kind in CurveKind::ALL.into_iter().filter(|k| wanted(*k)) {
        let pattern = match kind {
            CurveKind::IdealTof => ideal.clone().expect("computed above"),
            CurveKind::Smeared => smeared.clone().expect("computed above"),
            CurveKind::DampedSemiclassical => {
                models::damped_tof_pattern(&g, &config.instrument, &config.packet, &grid)
                    .map_err(|e| e.in_curve(kind.name()))?
            }
            CurveKind::Background => background_curve(&g, &config, &grid).map_err(|e| e.in_curve(kind.name()))?,
            CurveKind::ResolutionEnvelope => {
                let s = smeared.as_ref().expect("computed above");
                envelope(s, &config, g.period()).map_err(|e| e.in_curve(kind.name()))?
            }
            CurveKind::OracleQuantum | CurveKind::OracleSemiclassical => {
                oracle_curve(kind, &g, &config, &mut results.warnings).map_err(|e| e.in_curve(kind.name()))?
            }
        };
        if kind.has_peaks() {
            let search = find_peaks(&pattern, g.period());
            results.warnings.extend(
                search
                    .skipped
                    .iter()
                    .map(|s| format!("{kind}: order {} skipped: {}", s.order, s.reason)),
            );
            results.peaks.push((kind, search.peaks));
        }
        results.curves.push((kind, pattern));
    }
    Ok(results)
}

fn background_curve(g: &GratingSpec, config: &RunConfig, grid: &[f64]) -> Result<EchoPattern> {
    let samples = grid
        .iter()
        .map(|&xi| {
            Ok(EchoSample {
                xi_nm: xi,
                lambda_nm: Some(config.instrument.lambda_in_band(xi)?),
                polarization: models::background(g, &config.instrument, xi)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EchoPattern::new(samples)
}

fn envelope(smeared: &EchoPattern, config: &RunConfig, period_nm: f64) -> Result<EchoPattern> {
    let samples = find_peaks(smeared, period_nm)
        .peaks
        .iter()
        .map(|p| EchoSample {
            xi_nm: p.xi_peak_nm,
            lambda_nm: Some(config.instrument.lambda_of_xi(p.xi_peak_nm)),
            polarization: p.height,
        })
        .collect();
    EchoPattern::new(samples)
}

fn oracle_curve(
    kind: CurveKind,
    g: &GratingSpec,
    config: &RunConfig,
    warnings: &mut Vec<String>,
) -> Result<EchoPattern> {
    let case = OracleCase::new(g.clone(), config.packet.clone())
        .with_beam(config.beam)
        .with_grid(config.oracle.grid());
    let points = linspace(config.sweep.xi_min_nm, config.sweep.xi_max_nm, config.oracle.n_points);
    let evaluated = points
        .par_iter()
        .map(|&xi| {
            let lambda = config.instrument.lambda_in_band(xi)?;
            let phi = config
                .oracle
                .phase_rad
                .map(PhaseShift)
                .unwrap_or_else(|| models::tof_phase(g, lambda));
            let est = match kind {
                CurveKind::OracleQuantum => case.quantum(xi, phi)?,
                _ => case.semiclassical(xi, phi)?,
            };
            Ok((xi, lambda, est))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::with_capacity(evaluated.len());
    for (xi, lambda, est) in evaluated {
        warnings.extend(est.warnings.iter().map(|w| format!("{kind} at xi = {xi} nm: {w}")));
        samples.push(EchoSample {
            xi_nm: xi,
            lambda_nm: Some(lambda),
            polarization: est.polarization.clamp(-1.0, 1.0),
        });
    }
    EchoPattern::new(samples).map_err(|e| match e {
        Error::InvalidParameter(m) => Error::InvalidParameter(format!("oracle curve: {m}")),
        other => other,
    })
}
