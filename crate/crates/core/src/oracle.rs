//! First-principles echo polarization from Gaussian wave packets.
//!
//! The packet `g(k_y) ∝ exp(-Δ²(k_y - k0_y)²/4)` is sampled on a uniform
//! momentum lattice whose spacing `dk = 2π/(N p)` matches an aperture of `N`
//! whole grating periods. On that lattice the aperture transform of the
//! transmission is non-zero only at the grating orders `κ_n = 2πn/p`, so the
//! scattered amplitude at every outgoing `k'_y` is a short sum over orders.
//! The transverse integrals of the polarization functional are taken in
//! momentum space, where only components with identical `k'_y` interfere.
//!
//! Nothing here calls the closed forms in [`crate::models`]; they are what
//! this module checks.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grating::{GratingSpec, PhaseShift};
use crate::instrument::PhysicalConstants;
use crate::models::WavePacketSpec;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Uniform impact-parameter distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamProfile {
    pub width_nm: f64,
    pub n_impact_samples: usize,
}

impl Default for BeamProfile {
    fn default() -> Self {
        BeamProfile {
            width_nm: 4.0e6,
            n_impact_samples: 32,
        }
    }
}

impl BeamProfile {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.width_nm.is_finite() && self.width_nm > 0.0) {
            out.push(format!("beam.width_nm must be > 0 (got {})", self.width_nm));
        }
        if self.n_impact_samples < 16 {
            out.push(format!(
                "beam.n_impact_samples must be >= 16 (got {})",
                self.n_impact_samples
            ));
        }
        out
    }

    /// Stratified points over the beam; the offset inside each stratum is a
    /// golden-ratio sequence so the points do not alias with the grating period.
    pub fn impact_points(&self) -> Vec<f64> {
        let n = self.n_impact_samples.max(1);
        let golden = 0.5 * (5f64.sqrt() - 1.0);
        let h = self.width_nm / n as f64;
        (0..n)
            .map(|s| {
                let u = (0.5 + s as f64 * golden).fract();
                -0.5 * self.width_nm + (s as f64 + u) * h
            })
            .collect()
    }
}

/// Two-component spin state in the x basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spinor {
    pub up_x: Complex64,
    pub down_x: Complex64,
}

impl Spinor {
    pub const ZERO: Spinor = Spinor {
        up_x: Complex64::new(0.0, 0.0),
        down_x: Complex64::new(0.0, 0.0),
    };

    /// `|χ_s⟩ = (e^{-is/2}, -i e^{is/2})/√2` for `s = k·ξ`.
    pub fn entangled(k_dot_xi: f64) -> Spinor {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Spinor {
            up_x: Complex64::from_polar(r, -0.5 * k_dot_xi),
            down_x: -I * Complex64::from_polar(r, 0.5 * k_dot_xi),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.up_x.norm_sqr() + self.down_x.norm_sqr()
    }

    /// `⟨self|σ^y|other⟩` with `σ^y = [[0, i], [-i, 0]]` in the x basis.
    pub fn sigma_y(&self, other: &Spinor) -> Complex64 {
        self.up_x.conj() * (I * other.down_x) + self.down_x.conj() * (-I * other.up_x)
    }

    pub fn scale(&self, c: Complex64) -> Spinor {
        Spinor {
            up_x: self.up_x * c,
            down_x: self.down_x * c,
        }
    }

    pub fn add_scaled(&mut self, other: &Spinor, c: Complex64) {
        self.up_x += other.up_x * c;
        self.down_x += other.down_x * c;
    }

    /// Second flipper pair for outgoing momentum `k'`: `diag(e^{ik'ξ/2}, e^{-ik'ξ/2})`.
    pub fn disentangle(&self, k_out_dot_xi: f64) -> Spinor {
        let h = Complex64::from_polar(1.0, 0.5 * k_out_dot_xi);
        Spinor {
            up_x: self.up_x * h,
            down_x: self.down_x * h.conj(),
        }
    }
}

/// `|χ_{k·ξ}⟩` for in-plane `k = (k_y, k_z)` and `ξ = (ξ_y, ξ_z)`.
pub fn entangled_state(k_per_nm: [f64; 2], xi_nm: [f64; 2]) -> Spinor {
    Spinor::entangled(k_per_nm[0] * xi_nm[0] + k_per_nm[1] * xi_nm[1])
}

/// Free-neutron dispersion `ω = ħk²/2m` in rad/s for `k` in nm⁻¹.
pub fn dispersion(k_per_nm: f64) -> f64 {
    let c = PhysicalConstants::CODATA;
    let k = k_per_nm * 1e9;
    c.hbar() * k * k / (2.0 * c.neutron_mass_kg)
}

/// Lattice density and the convergence tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureGrid {
    /// Half-width of the k_y window in units of `1/Δ`.
    pub n_sigma: f64,
    /// Nominal number of k_y samples across the window.
    pub n_k: usize,
    /// Grating orders kept on each side; sets the real-space resolution `p/(2 n_orders)`.
    pub n_orders: usize,
    pub tolerance: f64,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid {
            n_sigma: 8.0,
            n_k: 1024,
            n_orders: 2048,
            tolerance: 5e-3,
        }
    }
}

impl QuadratureGrid {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.n_sigma >= 6.0) {
            out.push(format!("oracle.n_sigma must be >= 6 (got {})", self.n_sigma));
        }
        for (name, v) in [("n_k", self.n_k), ("n_orders", self.n_orders)] {
            if v < 256 || !v.is_power_of_two() {
                out.push(format!("oracle.{name} must be a power of two >= 256 (got {v})"));
            }
        }
        if !(self.tolerance > 0.0) {
            out.push(format!("oracle.tolerance must be > 0 (got {})", self.tolerance));
        }
        out
    }

    /// Both densities multiplied by `s` and rounded up to a power of two.
    pub fn scaled(&self, s: f64) -> QuadratureGrid {
        let f = |n: usize| ((n as f64 * s).ceil().max(256.0) as usize).next_power_of_two();
        QuadratureGrid {
            n_k: f(self.n_k),
            n_orders: f(self.n_orders),
            ..*self
        }
    }

    pub fn refined(&self) -> QuadratureGrid {
        QuadratureGrid {
            n_k: self.n_k * 2,
            n_orders: self.n_orders * 2,
            ..*self
        }
    }
}

/// Converged oracle value and its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEstimate {
    pub polarization: f64,
    /// Scattered over incident norm; 1 up to order truncation for a phase grating.
    pub norm_ratio: f64,
    /// `|P(refined grid) - P(grid)|`.
    pub refinement_change: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pipeline {
    SinglePath,
    Entangled,
    Control,
}

/// Momentum lattice for one packet, grating and grid.
struct Lattice {
    dk: f64,
    n_cells: i64,
    j_max: i64,
    orders: i64,
    k0y: f64,
    /// `g(k0y + j dk)` for `j = -j_max..=j_max`.
    amplitude: Vec<f64>,
}

impl Lattice {
    fn new(g: &GratingSpec, delta: f64, k0y: f64, grid: &QuadratureGrid) -> Lattice {
        let p = g.period();
        let dk_target = 2.0 * grid.n_sigma / (delta * grid.n_k as f64);
        let n_cells = (g.n_periods as f64).max((2.0 * PI / (dk_target * p)).ceil()) as i64;
        let dk = 2.0 * PI / (n_cells as f64 * p);
        let j_max = (grid.n_sigma / (delta * dk)).ceil() as i64;
        let norm = (delta / (2.0 * PI).sqrt()).sqrt();
        let amplitude = (-j_max..=j_max)
            .map(|j| {
                let u = j as f64 * dk;
                norm * (-0.25 * delta * delta * u * u).exp()
            })
            .collect();
        Lattice {
            dk,
            n_cells,
            j_max,
            orders: grid.n_orders as i64,
            k0y,
            amplitude,
        }
    }

    fn k(&self, j: i64) -> f64 {
        self.k0y + j as f64 * self.dk
    }

    /// Whether incoming components from different orders reach the same `k'`
    /// with appreciable weight. Their product is at most
    /// `g(0)² exp(-Δ²π²/2p²)`; below 1e-12 of the peak the interference is
    /// dropped and the result no longer depends on the impact parameter.
    fn blocks_overlap(&self, delta: f64, period: f64) -> bool {
        let cross = (-0.5 * (delta * PI / period).powi(2)).exp();
        2 * self.j_max + 1 > self.n_cells && cross > 1e-12
    }

    /// Incoming indices grouped by residue mod `N`, as `(j + j_max, j div N)`.
    fn residue_groups(&self) -> Vec<(i64, Vec<(usize, i64)>)> {
        let mut groups: BTreeMap<i64, Vec<(usize, i64)>> = BTreeMap::new();
        for j in -self.j_max..=self.j_max {
            let r = j.rem_euclid(self.n_cells);
            groups
                .entry(r)
                .or_default()
                .push(((j + self.j_max) as usize, (j - r) / self.n_cells));
        }
        groups.into_iter().collect()
    }
}

/// One oracle configuration: grating, packet, beam and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCase {
    pub grating: GratingSpec,
    pub packet: WavePacketSpec,
    pub beam: BeamProfile,
    pub grid: QuadratureGrid,
    /// Time since the packet left the grating; enters only as a phase.
    pub elapsed_s: f64,
}

impl OracleCase {
    pub fn new(grating: GratingSpec, packet: WavePacketSpec) -> OracleCase {
        OracleCase {
            grating,
            packet,
            beam: BeamProfile::default(),
            grid: QuadratureGrid::default(),
            elapsed_s: 0.0,
        }
    }

    pub fn with_beam(mut self, beam: BeamProfile) -> Self {
        self.beam = beam;
        self
    }

    pub fn with_grid(mut self, grid: QuadratureGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn at_time(mut self, elapsed_s: f64) -> Self {
        self.elapsed_s = elapsed_s;
        self
    }

    fn delta(&self) -> Result<f64> {
        self.packet.delta_nm.finite_nm().ok_or_else(|| {
            Error::InvalidParameter("the oracle needs a finite coherence width Δ".to_string())
        })
    }

    fn check(&self) -> Result<f64> {
        let mut v = self.grating.violations();
        v.extend(self.packet.violations());
        v.extend(self.beam.violations());
        v.extend(self.grid.violations());
        if !v.is_empty() {
            return Err(Error::Validation(v));
        }
        self.delta()
    }

    /// Single-path picture: impact-averaged `∫dq |f(q)|² cos(qξ)`, normalised.
    pub fn semiclassical(&self, xi_nm: f64, phi: PhaseShift) -> Result<OracleEstimate> {
        self.estimate(Pipeline::SinglePath, xi_nm, phi)
    }

    /// Two-path picture: entangled incoming spinors, disentangler, `⟨σ^y⟩`.
    pub fn quantum(&self, xi_nm: f64, phi: PhaseShift) -> Result<OracleEstimate> {
        self.estimate(Pipeline::Entangled, xi_nm, phi)
    }

    /// Two-path pipeline with every spinor replaced by the one at the mean momentum.
    pub fn unentangled_control(&self, xi_nm: f64, phi: PhaseShift) -> Result<OracleEstimate> {
        self.estimate(Pipeline::Control, xi_nm, phi)
    }

    /// `(1/2π) ∫_aperture e^{iκy} T(y) dy` over `N` whole cells centred on the origin.
    pub fn aperture_transform(&self, phi: PhaseShift, kappa: f64, n_cells: i64) -> Complex64 {
        let p = self.grating.period();
        let theta = kappa * p;
        let m0 = -(n_cells / 2);
        let s = Complex64::from_polar(1.0, theta);
        let lattice_sum = if (1.0 - s).norm() < 1e-12 {
            Complex64::from_polar(n_cells as f64, theta * m0 as f64)
        } else {
            Complex64::from_polar(1.0, theta * m0 as f64) * (1.0 - s.powi(n_cells as i32)) / (1.0 - s)
        };
        self.cell_transform(phi, kappa) * lattice_sum / (2.0 * PI)
    }

    /// `∫_{-a}^{b} e^{iκy} T(y) dy` over the canonical cell.
    fn cell_transform(&self, phi: PhaseShift, kappa: f64) -> Complex64 {
        let a = self.grating.a_nm;
        let b = self.grating.b_nm;
        let seg = |u: f64, v: f64| -> Complex64 {
            if kappa.abs() * (v - u) < 1e-9 {
                Complex64::new(v - u, 0.0) * Complex64::from_polar(1.0, 0.5 * kappa * (u + v))
            } else {
                (Complex64::from_polar(1.0, kappa * v) - Complex64::from_polar(1.0, kappa * u)) / (I * kappa)
            }
        };
        Complex64::from_polar(1.0, phi.radians()) * seg(-a, a) + seg(a, b)
    }

    /// Outgoing amplitude `f(q_y) = ∫dk g(k) e^{-ik y0} F(k - k0_y - q_y)` on the default lattice.
    pub fn scattering_amplitude(&self, y0_nm: f64, q_y: f64, phi: PhaseShift) -> Result<Complex64> {
        let delta = self.check()?;
        let lat = Lattice::new(&self.grating, delta, self.packet.k0_per_nm[1], &self.grid);
        let k_out = lat.k0y + q_y;
        Ok((-lat.j_max..=lat.j_max)
            .map(|j| {
                let k = lat.k(j);
                let g = lat.amplitude[(j + lat.j_max) as usize];
                lat.dk
                    * g
                    * Complex64::from_polar(1.0, -k * y0_nm)
                    * self.aperture_transform(phi, k - k_out, lat.n_cells)
            })
            .sum())
    }

    /// Momentum spacing of the default lattice, for sums over `q_y`.
    pub fn lattice_spacing(&self) -> Result<f64> {
        let delta = self.check()?;
        Ok(Lattice::new(&self.grating, delta, self.packet.k0_per_nm[1], &self.grid).dk)
    }

    fn estimate(&self, pipeline: Pipeline, xi_nm: f64, phi: PhaseShift) -> Result<OracleEstimate> {
        let delta = self.check()?;
        let mut warnings = Vec::new();
        let needed = delta.max(self.grating.period()).max(xi_nm.abs());
        if self.beam.width_nm <= needed {
            let w = format!(
                "beam width {} nm does not exceed max(Δ, p, ξ) = {} nm; uniform-beam approximation invalid",
                self.beam.width_nm, needed
            );
            log::warn!("{w}");
            warnings.push(w);
        }
        let (p0, _) = self.pass(pipeline, xi_nm, phi, delta, &self.grid);
        let (p1, norm) = self.pass(pipeline, xi_nm, phi, delta, &self.grid.refined());
        let change = (p1 - p0).abs();
        if !(change <= self.grid.tolerance) {
            return Err(Error::NotConverged {
                coarse: p0,
                refined: p1,
                tolerance: self.grid.tolerance,
            });
        }
        Ok(OracleEstimate {
            polarization: p1,
            norm_ratio: norm,
            refinement_change: change,
            warnings,
        })
    }

    /// Polarization and norm ratio on one lattice.
    fn pass(
        &self,
        pipeline: Pipeline,
        xi_nm: f64,
        phi: PhaseShift,
        delta: f64,
        grid: &QuadratureGrid,
    ) -> (f64, f64) {
        let lat = Lattice::new(&self.grating, delta, self.packet.k0_per_nm[1], grid);
        let order_weights: Vec<Complex64> = (-lat.orders..=lat.orders)
            .map(|n| {
                let kappa = 2.0 * PI * n as f64 / self.grating.period();
                lat.dk * self.aperture_transform(phi, kappa, lat.n_cells)
            })
            .collect();
        let incoming: Vec<Spinor> = (-lat.j_max..=lat.j_max)
            .map(|j| match pipeline {
                Pipeline::Entangled => Spinor::entangled(lat.k(j) * xi_nm),
                _ => Spinor::entangled(lat.k0y * xi_nm),
            })
            .collect();
        let groups = lat.residue_groups();
        let impacts = if lat.blocks_overlap(delta, self.grating.period()) {
            self.beam.impact_points()
        } else {
            vec![0.0]
        };

        let parts: Vec<(f64, f64)> = impacts
            .par_iter()
            .map(|&y0| self.accumulate(pipeline, &lat, &groups, &order_weights, &incoming, xi_nm, y0))
            .collect();
        let (num, den) = parts
            .iter()
            .fold((0.0, 0.0), |(n, d), &(pn, pd)| (n + pn, d + pd));
        let incident: f64 = lat.amplitude.iter().map(|g| g * g).sum();
        (num / den, den / (incident * impacts.len() as f64))
    }

    #[allow(clippy::too_many_arguments)]
    fn accumulate(
        &self,
        pipeline: Pipeline,
        lat: &Lattice,
        groups: &[(i64, Vec<(usize, i64)>)],
        order_weights: &[Complex64],
        incoming: &[Spinor],
        xi_nm: f64,
        y0: f64,
    ) -> (f64, f64) {
        let weights: Vec<Complex64> = (-lat.j_max..=lat.j_max)
            .map(|j| lat.amplitude[(j + lat.j_max) as usize] * Complex64::from_polar(1.0, -lat.k(j) * y0))
            .collect();
        let [k0x, _, k0z] = self.packet.k0_per_nm;
        let m_orders = lat.orders;
        let (mut num, mut den) = (0.0, 0.0);

        for (r, members) in groups {
            let lo = members.iter().map(|m| m.1).min().unwrap_or(0);
            let hi = members.iter().map(|m| m.1).max().unwrap_or(0);
            for m in (-m_orders - hi)..=(m_orders - lo) {
                let i = r - m * lat.n_cells;
                let k_out = lat.k(i);
                let mut f = Complex64::new(0.0, 0.0);
                let mut phi_se = Spinor::ZERO;
                for &(idx, n_shift) in members {
                    let n = m + n_shift;
                    if n < -m_orders || n > m_orders {
                        continue;
                    }
                    let term = weights[idx] * order_weights[(n + m_orders) as usize];
                    match pipeline {
                        Pipeline::Entangled => phi_se.add_scaled(&incoming[idx], term),
                        _ => f += term,
                    }
                }
                if self.elapsed_s != 0.0 {
                    let k_tot = (k0x * k0x + k_out * k_out + k0z * k0z).sqrt();
                    let phase = Complex64::from_polar(1.0, -dispersion(k_tot) * self.elapsed_s);
                    f *= phase;
                    phi_se = phi_se.scale(phase);
                }
                match pipeline {
                    Pipeline::SinglePath => {
                        let w = f.norm_sqr();
                        num += w * ((k_out - lat.k0y) * xi_nm).cos();
                        den += w;
                    }
                    Pipeline::Entangled | Pipeline::Control => {
                        if pipeline == Pipeline::Control {
                            phi_se = incoming[0].scale(f);
                        }
                        let out = phi_se.disentangle(k_out * xi_nm);
                        num += out.sigma_y(&out).re;
                        den += out.norm_sqr();
                    }
                }
            }
        }
        (num, den)
    }
}
