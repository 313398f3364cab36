//! One-dimensional rectangular phase grating.
//!
//! Within one cell `(-a, b]` the wall occupies `(-a, a]` and imparts the phase
//! `e^{iφ}`; the channel `(a, b]` is transparent. The period is `p = a + b`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Phase imparted by a single grating wall, in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PhaseShift(pub f64);

impl PhaseShift {
    pub const ZERO: PhaseShift = PhaseShift(0.0);

    pub fn radians(self) -> f64 {
        self.0
    }

    /// `1 - cos φ`, the contrast factor every closed form is linear in.
    pub fn contrast(self) -> f64 {
        1.0 - self.0.cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GratingSpec {
    /// Half of the wall width.
    pub a_nm: f64,
    /// Upper edge of the channel; the channel is `b - a` wide.
    pub b_nm: f64,
    pub depth_nm: f64,
    pub sld_per_nm2: f64,
    /// Number of periods used when a finite aperture is needed.
    pub n_periods: usize,
}

impl Default for GratingSpec {
    fn default() -> Self {
        Self::silicon_2um()
    }
}

impl GratingSpec {
    /// Validating constructor.
    pub fn new(a_nm: f64, b_nm: f64, depth_nm: f64, sld_per_nm2: f64, n_periods: usize) -> Result<Self> {
        let g = GratingSpec {
            a_nm,
            b_nm,
            depth_nm,
            sld_per_nm2,
            n_periods,
        };
        let problems = g.violations();
        if problems.is_empty() {
            Ok(g)
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// The measured silicon grating: 2 µm period, 560 nm channels, 10 µm deep.
    pub fn silicon_2um() -> Self {
        GratingSpec {
            a_nm: 720.0,
            b_nm: 1280.0,
            depth_nm: 1.0e4,
            sld_per_nm2: 2.06e-4,
            n_periods: 64,
        }
    }

    /// Every violated invariant, in a fixed order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.a_nm.is_finite() && self.a_nm >= 0.0) {
            out.push(format!("grating.a_nm must be >= 0 (got {})", self.a_nm));
        }
        if !(self.b_nm.is_finite() && self.b_nm > self.a_nm) {
            out.push(format!(
                "grating requires b > a >= 0 for the piecewise transmission (got a = {}, b = {})",
                self.a_nm, self.b_nm
            ));
        }
        if !(self.depth_nm.is_finite() && self.depth_nm > 0.0) {
            out.push(format!("grating.depth_nm must be > 0 (got {})", self.depth_nm));
        }
        if !(self.sld_per_nm2.is_finite() && self.sld_per_nm2 >= 0.0) {
            out.push(format!(
                "grating.sld_per_nm2 must be >= 0 (got {})",
                self.sld_per_nm2
            ));
        }
        if self.n_periods == 0 {
            out.push("grating.n_periods must be >= 1".to_string());
        }
        out
    }

    pub fn period(&self) -> f64 {
        self.a_nm + self.b_nm
    }

    pub fn wall_width(&self) -> f64 {
        2.0 * self.a_nm
    }

    pub fn channel_width(&self) -> f64 {
        self.b_nm - self.a_nm
    }

    /// `(min(2a, b-a), max(2a, b-a))`: the edges of the autocorrelation plateau.
    pub fn plateau_edges(&self) -> (f64, f64) {
        let (w, c) = (self.wall_width(), self.channel_width());
        (w.min(c), w.max(c))
    }

    /// Wall phase `φ = ρ h λ` at wavelength `lambda_nm`.
    pub fn phase_at(&self, lambda_nm: f64) -> PhaseShift {
        PhaseShift(self.sld_per_nm2 * self.depth_nm * lambda_nm)
    }

    /// Reduces `y` into the canonical cell `(-a, b]`.
    pub fn reduce(&self, y: f64) -> f64 {
        let p = self.period();
        let mut t = (y + self.a_nm).rem_euclid(p);
        if t == 0.0 {
            t = p;
        }
        t - self.a_nm
    }

    pub fn in_wall(&self, y: f64) -> bool {
        self.reduce(y) <= self.a_nm
    }

    /// Transmission `T(y)`: `e^{iφ}` on a wall, `1` in a channel.
    pub fn transmission(&self, phi: PhaseShift, y: f64) -> Complex64 {
        if self.in_wall(y) {
            Complex64::from_polar(1.0, phi.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    }

    /// `(1/p) Re ∫_{-p/2}^{p/2} T*(y) T(y + shift) dy` with the default rule.
    pub fn autocorrelation(&self, phi: PhaseShift, shift_nm: f64) -> Result<f64> {
        self.autocorrelation_with(phi, shift_nm, &AutocorrelationRule::default())
    }

    /// Autocorrelation by direct quadrature of the sampled transmission.
    ///
    /// The period is cut at every jump of `T*(y) T(y + s)` and each piece is
    /// integrated with a composite midpoint rule; the node count is doubled
    /// until two successive estimates agree to `rule.tolerance`.
    pub fn autocorrelation_with(
        &self,
        phi: PhaseShift,
        shift_nm: f64,
        rule: &AutocorrelationRule,
    ) -> Result<f64> {
        let p = self.period();
        let (lo, hi) = (-0.5 * p, 0.5 * p);
        let cuts = self.integrand_breakpoints(shift_nm, lo, hi);

        let integrand = |y: f64| (self.transmission(phi, y).conj() * self.transmission(phi, y + shift_nm)).re;
        let estimate = |budget: usize| -> f64 {
            cuts.windows(2)
                .map(|w| {
                    let len = w[1] - w[0];
                    let n = ((budget as f64 * len / p).round() as usize).max(2);
                    let h = len / n as f64;
                    (0..n).map(|i| integrand(w[0] + (i as f64 + 0.5) * h)).sum::<f64>() * h
                })
                .sum::<f64>()
                / p
        };

        let mut budget = rule.nodes.max(2);
        let mut coarse = estimate(budget);
        let mut achieved = f64::INFINITY;
        for _ in 0..=rule.max_doublings {
            budget *= 2;
            let fine = estimate(budget);
            achieved = (fine - coarse).abs() / fine.abs().max(1.0);
            if achieved <= rule.tolerance {
                return Ok(fine);
            }
            coarse = fine;
        }
        Err(Error::Quadrature {
            achieved,
            tolerance: rule.tolerance,
        })
    }

    fn integrand_breakpoints(&self, shift: f64, lo: f64, hi: f64) -> Vec<f64> {
        let p = self.period();
        let mut cuts = vec![lo, hi];
        for edge in [-self.a_nm, self.a_nm, -self.a_nm - shift, self.a_nm - shift] {
            let k0 = ((lo - edge) / p).floor() as i64 - 1;
            let k1 = ((hi - edge) / p).ceil() as i64 + 1;
            for k in k0..=k1 {
                let y = edge + k as f64 * p;
                if y > lo && y < hi {
                    cuts.push(y);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|b, a| (*b - *a).abs() <= 1e-12 * p);
        cuts
    }

    /// Fourier coefficient `c_n = (1/p) ∫_0^p T(y) e^{-i 2π n y / p} dy`, closed form.
    pub fn fourier_coefficient(&self, phi: PhaseShift, n: i64) -> Complex64 {
        let p = self.period();
        let step = Complex64::from_polar(1.0, phi.0) - 1.0;
        if n == 0 {
            Complex64::new(1.0, 0.0) + step * (self.wall_width() / p)
        } else {
            let n = n as f64;
            step * ((2.0 * PI * n * self.a_nm / p).sin() / (PI * n))
        }
    }

    /// Grating seen along the encoding direction when its channels are
    /// inclined at `tilt_rad` to it: `a` and `b` both scale by `1/sin(tilt)`.
    pub fn effective(&self, tilt_rad: f64) -> Result<GratingSpec> {
        if !(tilt_rad > 0.0 && tilt_rad <= PI / 2.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "grating tilt must lie in (0, π/2], got {tilt_rad} rad"
            )));
        }
        let scale = 1.0 / tilt_rad.sin();
        Ok(GratingSpec {
            a_nm: self.a_nm * scale,
            b_nm: self.b_nm * scale,
            ..self.clone()
        })
    }
}

/// Node budget and stopping rule for [`GratingSpec::autocorrelation_with`].
#[derive(Debug, Clone, Copy)]
pub struct AutocorrelationRule {
    /// Nodes per period for the first estimate.
    pub nodes: usize,
    pub tolerance: f64,
    pub max_doublings: usize,
}

impl Default for AutocorrelationRule {
    fn default() -> Self {
        AutocorrelationRule {
            nodes: 4096,
            tolerance: 1e-8,
            max_doublings: 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn silicon() -> GratingSpec {
        GratingSpec::silicon_2um()
    }

    #[test]
    fn geometry_of_measured_grating() {
        let g = silicon();
        assert_eq!(g.period(), 2000.0);
        assert_eq!(g.channel_width(), 560.0);
        assert_eq!(g.wall_width() + g.channel_width(), g.period());
        assert_eq!(g.plateau_edges(), (560.0, 1440.0));
    }

    #[test]
    fn transmission_regions() {
        let g = silicon();
        let pi = PhaseShift(PI);
        assert_abs_diff_eq!(g.transmission(pi, 0.0).re, -1.0, epsilon = 1e-15);
        assert_eq!(g.transmission(pi, 1000.0), Complex64::new(1.0, 0.0));
        assert_eq!(g.transmission(PhaseShift::ZERO, 0.0), Complex64::new(1.0, 0.0));
        // cell edges follow (-a, a] / (a, b]
        assert!(g.in_wall(720.0));
        assert!(!g.in_wall(720.000001));
        assert!(!g.in_wall(-720.0));
        assert!(g.in_wall(-719.999));
        assert!(!g.in_wall(1280.0));
    }

    #[test]
    fn transmission_periodic_and_unitary() {
        let g = silicon();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let y: f64 = rng.random_range(-1e6..1e6);
            let phi = PhaseShift(rng.random_range(-4.0..4.0));
            let t = g.transmission(phi, y);
            assert_abs_diff_eq!(t.norm(), 1.0, epsilon = 1e-14);
            assert_eq!(t, g.transmission(phi, y + g.period()));
        }
    }

    #[test]
    fn autocorrelation_reference_values() {
        let g = silicon();
        let pi = PhaseShift(PI);
        assert_abs_diff_eq!(g.autocorrelation(pi, 0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.autocorrelation(pi, 280.0).unwrap(), 0.44, epsilon = 1e-10);
        assert_abs_diff_eq!(g.autocorrelation(pi, 560.0).unwrap(), -0.12, epsilon = 1e-10);
        assert_abs_diff_eq!(g.autocorrelation(pi, 1000.0).unwrap(), -0.12, epsilon = 1e-10);
    }

    #[test]
    fn autocorrelation_symmetric_and_periodic() {
        let g = GratingSpec::new(300.0, 1700.0, 1e4, 2e-4, 1).unwrap();
        let phi = PhaseShift(1.3);
        for s in [37.0, 410.0, 999.0, 1650.0] {
            let c = g.autocorrelation(phi, s).unwrap();
            assert_abs_diff_eq!(c, g.autocorrelation(phi, -s).unwrap(), epsilon = 1e-9);
            assert_abs_diff_eq!(c, g.autocorrelation(phi, s + g.period()).unwrap(), epsilon = 1e-9);
            assert!(c.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn autocorrelation_reports_unmet_tolerance() {
        let rule = AutocorrelationRule {
            nodes: 8,
            tolerance: -1.0,
            max_doublings: 1,
        };
        match silicon().autocorrelation_with(PhaseShift(1.0), 123.4, &rule) {
            Err(Error::Quadrature { achieved, tolerance }) => {
                assert!(achieved.is_finite() && achieved >= 0.0);
                assert_eq!(tolerance, -1.0);
            }
            other => panic!("expected a quadrature diagnostic, got {other:?}"),
        }
    }

    /// Brute-force rectangle-rule transform over one period.
    fn coefficient_by_sum(g: &GratingSpec, phi: PhaseShift, n: i64) -> Complex64 {
        let p = g.period();
        let m = 200_000;
        let h = p / m as f64;
        (0..m)
            .map(|i| {
                let y = (i as f64 + 0.5) * h;
                g.transmission(phi, y) * Complex64::from_polar(1.0, -2.0 * PI * n as f64 * y / p)
            })
            .sum::<Complex64>()
            * (h / p)
    }

    #[test]
    fn fourier_coefficients() {
        let g = silicon();
        assert_eq!(g.fourier_coefficient(PhaseShift::ZERO, 0), Complex64::new(1.0, 0.0));
        for n in [-3, 1, 2, 7] {
            assert_eq!(g.fourier_coefficient(PhaseShift::ZERO, n).norm(), 0.0);
        }
        assert_abs_diff_eq!(g.fourier_coefficient(PhaseShift(PI), 0).norm(), 0.44, epsilon = 1e-12);
        for n in [-5, -1, 0, 1, 3, 10] {
            let exact = g.fourier_coefficient(PhaseShift(2.2), n);
            let brute = coefficient_by_sum(&g, PhaseShift(2.2), n);
            assert_abs_diff_eq!((exact - brute).norm(), 0.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn parseval() {
        let g = silicon();
        let phi = PhaseShift(PI);
        let total: f64 = (-500..=500).map(|n| g.fourier_coefficient(phi, n).norm_sqr()).sum();
        assert!((0.999..=1.0 + 1e-12).contains(&total), "{total}");
    }

    #[test]
    fn effective_grating() {
        let g = silicon();
        assert_eq!(g.effective(PI / 2.0).unwrap(), g);
        let g8 = g.effective(8f64.to_radians()).unwrap();
        assert_abs_diff_eq!(g8.period(), 14_370.6, epsilon = 0.05);
        assert_abs_diff_eq!(g8.channel_width() / g8.period(), 0.28, epsilon = 1e-12);
        assert_eq!(g8.depth_nm, g.depth_nm);
        let g5 = g.effective(5f64.to_radians()).unwrap();
        assert_abs_diff_eq!(g5.period(), 22947.4, epsilon = 0.1);
        assert!(g.effective(0.0).is_err());
        assert!(g.effective(-0.1).is_err());
    }

    #[test]
    fn validation_lists_every_problem() {
        match GratingSpec::new(800.0, 700.0, -1.0, 2e-4, 0) {
            Err(Error::Validation(v)) => {
                assert_eq!(v.len(), 3);
                assert!(v[0].contains("b > a"));
            }
            other => panic!("{other:?}"),
        }
    }
}
