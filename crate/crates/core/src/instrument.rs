//! Time-of-flight spin-echo kinematics, instrumental resolution and peak analysis.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};
use crate::models::{EchoPattern, EchoSample};

/// CODATA values entering the spin echo constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub neutron_mass_kg: f64,
    pub planck_constant_js: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        neutron_mass_kg: 1.674_927_500_56e-27,
        planck_constant_js: 6.626_070_15e-34,
    };

    pub fn hbar(&self) -> f64 {
        self.planck_constant_js / (2.0 * PI)
    }
}

/// Spin echo constant `ξ0 = 2 m f L cot θ0 / h`, in nm per nm² of wavelength.
pub fn spin_echo_constant(rf_frequency_hz: f64, arm_length_m: f64, field_angle_rad: f64) -> Result<f64> {
    if !(rf_frequency_hz > 0.0 && arm_length_m > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rf frequency and arm length must be positive (got {rf_frequency_hz} Hz, {arm_length_m} m)"
        )));
    }
    if !(field_angle_rad > 0.0 && field_angle_rad < FRAC_PI_2) {
        return Err(Error::InvalidParameter(format!(
            "field angle must lie in (0, π/2), got {field_angle_rad} rad"
        )));
    }
    let c = PhysicalConstants::CODATA;
    let per_m = 2.0 * c.neutron_mass_kg * rf_frequency_hz * arm_length_m / field_angle_rad.tan()
        / c.planck_constant_js;
    // m⁻¹ -> nm⁻¹
    Ok(per_m * 1e-9)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentConfig {
    /// `ξ0` in nm/nm², so that `ξ = ξ0 λ²` with `ξ` and `λ` in nm.
    pub xi0_per_nm: f64,
    pub rf_frequency_hz: f64,
    /// Distance between the rf flippers in one arm, when known.
    #[serde(default)]
    pub arm_length_m: Option<f64>,
    pub field_angle_rad: f64,
    pub lambda_band_nm: (f64, f64),
    pub tof_bin_nm: f64,
}

impl Default for InstrumentConfig {
    fn default() -> Self {
        InstrumentConfig::larmor(2.0e6)
    }
}

impl InstrumentConfig {
    /// Larmor-like setup at `rf_frequency_hz` with a 1 m arm and θ0 = 45°.
    ///
    /// The wavelength band is chosen so that ξ covers 0.5–26 µm.
    pub fn larmor(rf_frequency_hz: f64) -> Self {
        let field_angle_rad = PI / 4.0;
        let xi0 = spin_echo_constant(rf_frequency_hz, 1.0, field_angle_rad)
            .expect("positive frequency");
        let band = if rf_frequency_hz <= 2.5e6 {
            (0.22, 1.61)
        } else {
            (0.18, 1.32)
        };
        InstrumentConfig {
            xi0_per_nm: xi0,
            rf_frequency_hz,
            arm_length_m: Some(1.0),
            field_angle_rad,
            lambda_band_nm: band,
            tof_bin_nm: 0.0025,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.xi0_per_nm.is_finite() && self.xi0_per_nm > 0.0) {
            out.push(format!("instrument.xi0_per_nm must be > 0 (got {})", self.xi0_per_nm));
        }
        if !(self.rf_frequency_hz > 0.0) {
            out.push(format!(
                "instrument.rf_frequency_hz must be > 0 (got {})",
                self.rf_frequency_hz
            ));
        }
        if let Some(l) = self.arm_length_m {
            if !(l > 0.0) {
                out.push(format!("instrument.arm_length_m must be > 0 (got {l})"));
            }
        }
        if !(self.field_angle_rad > 0.0 && self.field_angle_rad < FRAC_PI_2) {
            out.push(format!(
                "instrument.field_angle_rad must lie in (0, π/2) (got {})",
                self.field_angle_rad
            ));
        }
        let (lo, hi) = self.lambda_band_nm;
        if !(lo > 0.0 && lo < hi) {
            out.push(format!(
                "instrument.lambda_band_nm must satisfy 0 < min < max (got [{lo}, {hi}])"
            ));
        }
        if !(self.tof_bin_nm > 0.0) {
            out.push(format!("instrument.tof_bin_nm must be > 0 (got {})", self.tof_bin_nm));
        }
        out
    }

    pub fn xi_of_lambda(&self, lambda_nm: f64) -> f64 {
        self.xi0_per_nm * lambda_nm * lambda_nm
    }

    pub fn lambda_of_xi(&self, xi_nm: f64) -> f64 {
        (xi_nm / self.xi0_per_nm).sqrt()
    }

    /// `[ξ0 λ_min², ξ0 λ_max²]`.
    pub fn xi_band(&self) -> (f64, f64) {
        let (lo, hi) = self.lambda_band_nm;
        (self.xi_of_lambda(lo), self.xi_of_lambda(hi))
    }

    /// Wavelength for `xi_nm`, or an error naming the admissible interval.
    pub fn lambda_in_band(&self, xi_nm: f64) -> Result<f64> {
        let (min_nm, max_nm) = self.xi_band();
        let slack = 1e-12 * max_nm;
        if !(xi_nm >= min_nm - slack && xi_nm <= max_nm + slack) {
            return Err(Error::OutOfBand {
                xi_nm,
                min_nm,
                max_nm,
            });
        }
        Ok(self.lambda_of_xi(xi_nm))
    }
}

/// Standard deviations of the independent contributions to `δξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolutionParams {
    /// Beam divergence.
    pub delta_theta_rad: f64,
    /// Channel misplacement.
    pub delta_j_nm: f64,
    /// Wavelength spread from the TOF bin.
    pub delta_b_nm: f64,
    /// Constant part of the pulse-width wavelength spread.
    pub a_lambda_nm: f64,
    /// Part of the pulse-width wavelength spread linear in λ.
    pub b_lambda: f64,
}

impl Default for ResolutionParams {
    fn default() -> Self {
        ResolutionParams::larmor()
    }
}

impl ResolutionParams {
    pub const NONE: ResolutionParams = ResolutionParams {
        delta_theta_rad: 0.0,
        delta_j_nm: 0.0,
        delta_b_nm: 0.0,
        a_lambda_nm: 0.0,
        b_lambda: 0.0,
    };

    /// Values for the Larmor measurements with the 2 µm grating.
    pub fn larmor() -> Self {
        ResolutionParams {
            delta_theta_rad: 0.75e-3,
            delta_j_nm: 10.0,
            delta_b_nm: 1e-3,
            a_lambda_nm: 3.33e-4,
            b_lambda: 1.01e-4,
        }
    }

    /// Every parameter multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        ResolutionParams {
            delta_theta_rad: self.delta_theta_rad * s,
            delta_j_nm: self.delta_j_nm * s,
            delta_b_nm: self.delta_b_nm * s,
            a_lambda_nm: self.a_lambda_nm * s,
            b_lambda: self.b_lambda * s,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        [
            ("delta_theta_rad", self.delta_theta_rad),
            ("delta_j_nm", self.delta_j_nm),
            ("delta_b_nm", self.delta_b_nm),
            ("a_lambda_nm", self.a_lambda_nm),
            ("b_lambda", self.b_lambda),
        ]
        .into_iter()
        .filter(|(_, v)| !(v.is_finite() && *v >= 0.0))
        .map(|(name, v)| format!("resolution.{name} must be >= 0 (got {v})"))
        .collect()
    }
}

/// `δξ` at spin echo length `xi_nm`:
/// `(δξ/ξ)² = 4δθ²/sin²(2θ0) + 4(δλ² + δb²)/(ξ/ξ0) + δJ²/ξ²`, `δλ = aλ + bλ √(ξ/ξ0)`.
pub fn resolution_sigma(inst: &InstrumentConfig, res: &ResolutionParams, xi_nm: f64) -> f64 {
    let lambda_sq = xi_nm / inst.xi0_per_nm;
    let d_lambda = res.a_lambda_nm + res.b_lambda * lambda_sq.sqrt();
    let s2 = (2.0 * inst.field_angle_rad).sin().powi(2);
    let relative_sq = 4.0 * res.delta_theta_rad.powi(2) / s2
        + 4.0 * (d_lambda.powi(2) + res.delta_b_nm.powi(2)) / lambda_sq;
    (xi_nm * xi_nm * relative_sq + res.delta_j_nm.powi(2)).sqrt()
}

const KERNEL_HALF_WIDTH: f64 = 6.0;

/// Heteroscedastic Gaussian smearing with `σ(ξ)` from [`resolution_sigma`].
///
/// The pattern is read as its piecewise-linear interpolant, which is
/// integrated exactly against the Gaussian truncated at ±6σ and renormalised
/// over the part of the window the pattern covers.
pub fn convolve_resolution(
    pattern: &EchoPattern,
    inst: &InstrumentConfig,
    res: &ResolutionParams,
) -> Result<EchoPattern> {
    let xs = pattern.xi();
    let ys = pattern.polarization();
    let smeared = xs
        .par_iter()
        .enumerate()
        .map(|(i, &mu)| {
            let sigma = resolution_sigma(inst, res, mu);
            if sigma == 0.0 {
                Ok(ys[i])
            } else {
                smear_point(&xs, &ys, mu, sigma)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    pattern.with_polarization(smeared)
}

/// Convolution of the linear interpolant of `(xs, ys)` with `N(mu, sigma²)`.
pub fn smear_point(xs: &[f64], ys: &[f64], mu: f64, sigma: f64) -> Result<f64> {
    let n = xs.len();
    if n < 2 {
        return Ok(ys.first().copied().unwrap_or(0.0));
    }
    let lo = (mu - KERNEL_HALF_WIDTH * sigma).max(xs[0]);
    let hi = (mu + KERNEL_HALF_WIDTH * sigma).min(xs[n - 1]);
    let first = xs.partition_point(|&x| x <= lo).saturating_sub(1);
    let required = sigma / 4.0;

    let mut total = 0.0;
    let mut mass = 0.0;
    for j in first..n - 1 {
        let (xa, xb) = (xs[j], xs[j + 1]);
        if xa >= hi {
            break;
        }
        if xb - xa > required * (1.0 + 1e-9) {
            return Err(Error::GridTooCoarse {
                xi_nm: mu,
                spacing_nm: xb - xa,
                required_nm: required,
            });
        }
        let x0 = xa.max(lo);
        let x1 = xb.min(hi);
        if x1 <= x0 {
            continue;
        }
        let slope = (ys[j + 1] - ys[j]) / (xb - xa);
        let y0 = ys[j] + slope * (x0 - xa);
        let (z0, z1) = ((x0 - mu) / sigma, (x1 - mu) / sigma);
        let m0 = normal_cdf_diff(z0, z1);
        let m1 = sigma * (normal_pdf(z0) - normal_pdf(z1));
        total += (y0 + slope * (mu - x0)) * m0 + slope * m1;
        mass += m0;
    }
    if mass > 0.0 {
        Ok(total / mass)
    } else {
        let k = xs.partition_point(|&x| x < mu).min(n - 1);
        Ok(ys[k])
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `Φ(z1) - Φ(z0)` without cancellation in the tails.
fn normal_cdf_diff(z0: f64, z1: f64) -> f64 {
    if z0 >= 0.0 {
        0.5 * (erfc(z0 / SQRT_2) - erfc(z1 / SQRT_2))
    } else if z1 <= 0.0 {
        0.5 * (erfc(-z1 / SQRT_2) - erfc(-z0 / SQRT_2))
    } else {
        0.5 * (erf(z1 / SQRT_2) - erf(z0 / SQRT_2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    pub order: u32,
    pub xi_peak_nm: f64,
    pub height: f64,
    /// Full width at half prominence.
    pub width_nm: f64,
}

/// A search window that produced no estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedWindow {
    pub order: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeakSearch {
    pub peaks: Vec<PeakEstimate>,
    pub skipped: Vec<SkippedWindow>,
}

/// One peak per window `[n p - p/2, n p + p/2]`, `n ≥ 1`.
///
/// A window cut by the end of the pattern still yields a peak when its
/// maximum lies strictly inside the covered part; the cut flank is then
/// ignored for the prominence and mirrored from the other flank for the width.
pub fn find_peaks(pattern: &EchoPattern, period_nm: f64) -> PeakSearch {
    let mut search = PeakSearch::default();
    let Some((xi_min, xi_max)) = pattern.xi_range() else {
        return search;
    };
    let xs = pattern.xi();
    let ys = pattern.polarization();
    let half = 0.5 * period_nm;
    let mut order = 1u32;
    while order as f64 * period_nm - half < xi_max {
        let centre = order as f64 * period_nm;
        let (w0, w1) = (centre - half, centre + half);
        let i0 = xs.partition_point(|&x| x < w0);
        let i1 = xs.partition_point(|&x| x <= w1);
        let cut = (w0 < xi_min, w1 > xi_max);
        let mut skip = |reason: String| {
            log::warn!("peak window {order} skipped: {reason}");
            search.skipped.push(SkippedWindow { order, reason });
        };
        if i1 < i0 + 3 {
            skip(format!("window [{w0}, {w1}] nm holds fewer than 3 samples"));
        } else {
            let ipk = (i0..i1).fold(i0, |best, i| if ys[i] > ys[best] { i } else { best });
            // a cut window needs an interior maximum; at either end it is a slope, not a peak
            if (cut.0 || cut.1) && (ipk == i0 || ipk == i1 - 1) {
                skip(format!(
                    "window [{w0}, {w1}] nm is cut by pattern [{xi_min}, {xi_max}] nm and has no interior maximum"
                ));
            } else {
                search.peaks.push(peak_in(&xs, &ys, i0, i1, ipk, cut, order));
            }
        }
        order += 1;
    }
    search
}

fn peak_in(
    xs: &[f64],
    ys: &[f64],
    i0: usize,
    i1: usize,
    ipk: usize,
    cut: (bool, bool),
    order: u32,
) -> PeakEstimate {
    let height = ys[ipk];
    let left_min = ys[i0..=ipk].iter().copied().fold(f64::INFINITY, f64::min);
    let right_min = ys[ipk..i1].iter().copied().fold(f64::INFINITY, f64::min);
    let base = match cut {
        (true, false) => right_min,
        (false, true) => left_min,
        _ => left_min.max(right_min),
    };
    let half = height - 0.5 * (height - base);

    let mut left = None;
    for i in (i0..ipk).rev() {
        if ys[i] <= half {
            left = Some(crossing(xs[i], ys[i], xs[i + 1], ys[i + 1], half));
            break;
        }
    }
    let mut right = None;
    for i in ipk + 1..i1 {
        if ys[i] <= half {
            right = Some(crossing(xs[i - 1], ys[i - 1], xs[i], ys[i], half));
            break;
        }
    }
    let x = xs[ipk];
    let width_nm = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (None, Some(r)) if cut.0 => 2.0 * (r - x),
        (Some(l), None) if cut.1 => 2.0 * (x - l),
        (l, r) => r.unwrap_or(xs[i1 - 1]) - l.unwrap_or(xs[i0]),
    };
    PeakEstimate {
        order,
        xi_peak_nm: x,
        height,
        width_nm,
    }
}

fn crossing(x0: f64, y0: f64, x1: f64, y1: f64, level: f64) -> f64 {
    if y1 == y0 {
        x0
    } else {
        x0 + (level - y0) * (x1 - x0) / (y1 - y0)
    }
}

/// Background through the local minima between echo peaks.
///
/// The minima are fitted with `1 - A (1 - cos(κ √ξ))`, the shape a wall
/// phase proportional to λ produces; the raw knots are kept as well.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundCurve {
    pub knots: Vec<(f64, f64)>,
    pub amplitude: f64,
    pub rate: f64,
}

impl BackgroundCurve {
    pub fn eval(&self, xi_nm: f64) -> f64 {
        1.0 - self.amplitude * (1.0 - (self.rate * xi_nm.max(0.0).sqrt()).cos())
    }

    /// Straight-line interpolation between the knots, flat beyond them.
    pub fn interpolate_linear(&self, xi_nm: f64) -> f64 {
        let k = &self.knots;
        let j = k.partition_point(|&(x, _)| x <= xi_nm);
        if j == 0 {
            k[0].1
        } else if j == k.len() {
            k[k.len() - 1].1
        } else {
            let ((x0, y0), (x1, y1)) = (k[j - 1], k[j]);
            y0 + (y1 - y0) * (xi_nm - x0) / (x1 - x0)
        }
    }

    /// `(P - BG)/(1 - BG)`: peaks on a unit scale above a flat zero baseline.
    /// Points where the background is within 1e-12 of unity are left as is.
    pub fn detrend(&self, pattern: &EchoPattern) -> Result<EchoPattern> {
        let values = pattern
            .samples()
            .iter()
            .map(|s| {
                let bg = self.eval(s.xi_nm);
                if 1.0 - bg > 1e-12 {
                    (s.polarization - bg) / (1.0 - bg)
                } else {
                    s.polarization
                }
            })
            .collect::<Vec<_>>();
        let clipped = values.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        pattern.with_polarization(clipped)
    }
}

/// Local minima between successive peaks, one per period window `[n p, (n+1) p]`.
pub fn local_minima(pattern: &EchoPattern, period_nm: f64) -> Vec<(f64, f64)> {
    let s: &[EchoSample] = pattern.samples();
    let Some((xi_min, xi_max)) = pattern.xi_range() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut n = (xi_min / period_nm).floor() as i64;
    while (n as f64) * period_nm < xi_max {
        let (w0, w1) = (n as f64 * period_nm, (n + 1) as f64 * period_nm);
        let i0 = s.partition_point(|x| x.xi_nm < w0);
        let i1 = s.partition_point(|x| x.xi_nm < w1);
        if i1 > i0 {
            let imin = (i0..i1).fold(i0, |best, i| {
                if s[i].polarization < s[best].polarization {
                    i
                } else {
                    best
                }
            });
            if imin != 0 && imin != s.len() - 1 {
                out.push((s[imin].xi_nm, s[imin].polarization));
            }
        }
        n += 1;
    }
    out
}

/// Fits the background of `pattern` from its local minima.
pub fn fit_background(pattern: &EchoPattern, period_nm: f64) -> Result<BackgroundCurve> {
    let knots = local_minima(pattern, period_nm);
    if knots.len() < 2 {
        return Err(Error::TooFewMinima(knots.len()));
    }
    let xi_max = knots.last().map(|k| k.0).unwrap_or(1.0);

    // amplitude is linear given the rate: scan the rate, then refine
    let fit = |rate: f64| -> (f64, f64) {
        let (mut su, mut suu) = (0.0, 0.0);
        for &(x, y) in &knots {
            let u = 1.0 - (rate * x.sqrt()).cos();
            su += (1.0 - y) * u;
            suu += u * u;
        }
        let amp = if suu > 1e-300 { su / suu } else { 0.0 };
        let ssr = knots
            .iter()
            .map(|&(x, y)| {
                let r = 1.0 - amp * (1.0 - (rate * x.sqrt()).cos()) - y;
                r * r
            })
            .sum();
        (amp, ssr)
    };

    let rate_max = 4.0 * PI / xi_max.sqrt();
    let steps = 4000;
    let h = rate_max / steps as f64;
    let mut best = (0.0, fit(0.0).1);
    for i in 1..=steps {
        let r = i as f64 * h;
        let ssr = fit(r).1;
        if ssr < best.1 {
            best = (r, ssr);
        }
    }
    // golden-section polish on the bracketing cell
    let (mut a, mut b) = ((best.0 - h).max(0.0), best.0 + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if fit(c).1 < fit(d).1 {
            b = d;
        } else {
            a = c;
        }
    }
    let rate = 0.5 * (a + b);
    let rate = if fit(rate).1 <= best.1 { rate } else { best.0 };
    let (amplitude, _) = fit(rate);
    Ok(BackgroundCurve {
        knots,
        amplitude,
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spin_echo_constant_values() {
        let xi0 = spin_echo_constant(2e6, 1.0, PI / 4.0).unwrap();
        assert_relative_eq!(xi0, 1.011e4, max_relative = 1e-3);
        let xi0_2f = spin_echo_constant(4e6, 1.0, PI / 4.0).unwrap();
        assert_relative_eq!(xi0_2f, 2.0 * xi0, max_relative = 1e-14);
        let c = PhysicalConstants::CODATA;
        let direct = 2.0 * c.neutron_mass_kg * 2e6 * 1.0 / c.planck_constant_js * 1e-9;
        assert_relative_eq!(xi0, direct, max_relative = 1e-14);
        assert!(spin_echo_constant(2e6, 1.0, 0.0).is_err());
        assert!(spin_echo_constant(-1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn lambda_xi_round_trip() {
        let inst = InstrumentConfig {
            xi0_per_nm: 10110.0,
            ..InstrumentConfig::default()
        };
        assert_eq!(inst.xi_of_lambda(1.0), 10110.0);
        assert_eq!(inst.xi_of_lambda(0.0), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let l: f64 = rng.random_range(0.05..2.0);
            assert_relative_eq!(inst.lambda_of_xi(inst.xi_of_lambda(l)), l, max_relative = 1e-12);
        }
    }

    #[test]
    fn band_check_names_interval() {
        let inst = InstrumentConfig::larmor(2e6);
        let (lo, hi) = inst.xi_band();
        assert!(inst.lambda_in_band(lo).is_ok());
        assert!(inst.lambda_in_band(hi).is_ok());
        match inst.lambda_in_band(hi * 1.01) {
            Err(Error::OutOfBand { min_nm, max_nm, .. }) => {
                assert_eq!((min_nm, max_nm), (lo, hi));
            }
            other => panic!("{other:?}"),
        }
        assert!(lo <= 500.0 && hi >= 26_000.0);
        let (lo3, hi3) = InstrumentConfig::larmor(3e6).xi_band();
        assert!(lo3 <= 500.0 && hi3 >= 26_000.0);
    }

    #[test]
    fn resolution_sigma_values() {
        let inst = InstrumentConfig {
            xi0_per_nm: 10110.0,
            field_angle_rad: PI / 4.0,
            ..InstrumentConfig::default()
        };
        assert_eq!(resolution_sigma(&inst, &ResolutionParams::NONE, 2000.0), 0.0);
        assert_abs_diff_eq!(
            resolution_sigma(&inst, &ResolutionParams::larmor(), 2000.0),
            14.2,
            epsilon = 0.05
        );
        let only_j = ResolutionParams {
            delta_j_nm: 10.0,
            ..ResolutionParams::NONE
        };
        for xi in [100.0, 5000.0, 25_000.0] {
            assert_abs_diff_eq!(resolution_sigma(&inst, &only_j, xi), 10.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn resolution_sigma_limits() {
        let inst = InstrumentConfig::larmor(2e6);
        let res = ResolutionParams::larmor();
        // δJ dominates at small ξ, δθ at large ξ
        let small = resolution_sigma(&inst, &res, 1e-3);
        assert_relative_eq!(small, res.delta_j_nm, max_relative = 1e-3);
        let big = 1e12;
        let theta_only = big * 2.0 * res.delta_theta_rad / (2.0 * inst.field_angle_rad).sin();
        assert_relative_eq!(resolution_sigma(&inst, &res, big), theta_only, max_relative = 1e-2);
        let mut prev = resolution_sigma(&inst, &res, 30.0);
        for i in 2..1000 {
            let s = resolution_sigma(&inst, &res, i as f64 * 30.0);
            assert!(s > 0.0 && (s - prev).abs() < 1.0);
            prev = s;
        }
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn smearing_identities() {
        let inst = InstrumentConfig::larmor(2e6);
        let xs = grid(1000.0, 6000.0, 4001);
        let ys: Vec<f64> = xs.iter().map(|x| (x / 300.0).sin() * 0.8).collect();
        let p = EchoPattern::from_xy(&xs, &ys).unwrap();
        assert_eq!(convolve_resolution(&p, &inst, &ResolutionParams::NONE).unwrap(), p);

        let flat = EchoPattern::from_xy(&xs, &vec![0.37; xs.len()]).unwrap();
        let out = convolve_resolution(&flat, &inst, &ResolutionParams::larmor()).unwrap();
        for v in out.polarization() {
            assert_abs_diff_eq!(v, 0.37, epsilon = 1e-13);
        }

        let out = convolve_resolution(&p, &inst, &ResolutionParams::larmor()).unwrap();
        let (lo, hi) = ys.iter().fold((1.0f64, -1.0f64), |(a, b), &y| (a.min(y), b.max(y)));
        for v in out.polarization() {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn smearing_rejects_coarse_grid() {
        let inst = InstrumentConfig::larmor(2e6);
        let xs = grid(1000.0, 6000.0, 101);
        let p = EchoPattern::from_xy(&xs, &vec![0.5; 101]).unwrap();
        match convolve_resolution(&p, &inst, &ResolutionParams::larmor()) {
            Err(Error::GridTooCoarse { required_nm, spacing_nm, .. }) => {
                assert!(spacing_nm > required_nm)
            }
            other => panic!("{other:?}"),
        }
    }

    /// Centre height of a unit triangle of half-width `w` smeared by `N(0, σ²)`.
    fn triangle_gaussian_peak(w: f64, s: f64) -> f64 {
        let t = w / s;
        erf(t / SQRT_2) - 2.0 * s / (w * (2.0 * PI).sqrt()) * (1.0 - (-0.5 * t * t).exp())
    }

    #[test]
    fn triangle_peak_matches_analytic() {
        let (w, s) = (400.0, 12.0);
        let xs = grid(0.0, 2000.0, 2001);
        let ys: Vec<f64> = xs.iter().map(|x| (1.0 - (x - 1000.0).abs() / w).max(0.0)).collect();
        let smeared = smear_point(&xs, &ys, 1000.0, s).unwrap();
        assert_abs_diff_eq!(smeared, triangle_gaussian_peak(w, s), epsilon = 1e-6);

        // same through find_peaks on a fully smeared pattern
        let p = EchoPattern::from_xy(&xs, &ys).unwrap();
        let vals: Vec<f64> = xs.iter().map(|&x| smear_point(&xs, &ys, x, s).unwrap()).collect();
        let sm = p.with_polarization(vals).unwrap();
        let peaks = find_peaks(&sm, 1000.0).peaks;
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].xi_peak_nm, 1000.0);
        assert_abs_diff_eq!(peaks[0].height, triangle_gaussian_peak(w, s), epsilon = 1e-6);
        // half prominence sits at h/2, so the linear flanks cross at 2w(1 - h/2)
        let h = peaks[0].height;
        assert_abs_diff_eq!(peaks[0].width_nm, 2.0 * w * (1.0 - 0.5 * h), epsilon = 1.0);
    }

    #[test]
    fn find_peaks_skips_uncovered_windows() {
        let xs = grid(500.0, 5200.0, 4701);
        let ys: Vec<f64> = xs.iter().map(|x| (2.0 * PI * x / 2000.0).cos()).collect();
        let p = EchoPattern::from_xy(&xs, &ys).unwrap();
        let s = find_peaks(&p, 2000.0);
        assert_eq!(s.peaks.len(), 2);
        assert_eq!(s.peaks[1].order, 2);
        assert_abs_diff_eq!(s.peaks[1].xi_peak_nm, 4000.0, epsilon = 1e-9);
        assert_eq!(s.skipped.len(), 1);
        assert_eq!(s.skipped[0].order, 3);
    }

    #[test]
    fn background_fit_flat_and_too_few() {
        let xs = grid(500.0, 9000.0, 1001);
        let flat = EchoPattern::from_xy(&xs, &vec![1.0; xs.len()]).unwrap();
        let bg = fit_background(&flat, 2000.0).unwrap();
        for x in [600.0, 4000.0, 8900.0] {
            assert_abs_diff_eq!(bg.eval(x), 1.0, epsilon = 1e-12);
        }
        let short = EchoPattern::from_xy(&grid(500.0, 1500.0, 101), &vec![0.5; 101]).unwrap();
        assert!(matches!(fit_background(&short, 2000.0), Err(Error::TooFewMinima(_))));
    }
}
