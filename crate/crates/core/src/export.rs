//! CSV output, one file per curve and per peak table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::run::RunResults;

/// `x` in fixed notation with 12 significant digits.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0.00000000000".to_string() } else { x.to_string() };
    }
    // exponent after rounding to 12 digits, so carries are accounted for
    let sci = format!("{x:.11e}");
    let exponent: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    let decimals = (11 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

fn header(results: &RunResults) -> String {
    match &results.provenance {
        Some(p) => format!("# {}\n", p.replace('\n', " ")),
        None => String::new(),
    }
}

/// Writes `<curve>.csv` and `peaks_<curve>.csv` into `dir` and returns the paths.
/// Nothing is written when the results hold no samples.
pub fn export_csv(results: &RunResults, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    for (kind, pattern) in &results.curves {
        let mut out = header(results);
        out.push_str("xi_nm,lambda_nm,polarization\n");
        for s in pattern.samples() {
            let lambda = s.lambda_nm.map(format_sig12).unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", format_sig12(s.xi_nm), lambda, format_sig12(s.polarization));
        }
        let path = dir.join(format!("{}.csv", kind.name()));
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    for (kind, peaks) in &results.peaks {
        let mut out = header(results);
        out.push_str("order,xi_peak_nm,height,width_nm\n");
        for p in peaks {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                p.order,
                format_sig12(p.xi_peak_nm),
                format_sig12(p.height),
                format_sig12(p.width_nm)
            );
        }
        let path = dir.join(format!("peaks_{}.csv", kind.name()));
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::EchoPattern;
    use crate::run::CurveKind;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_sig12(0.44), "0.440000000000");
        assert_eq!(format_sig12(2000.0), "2000.00000000");
        assert_eq!(format_sig12(-0.11925), "-0.119250000000");
        assert_eq!(format_sig12(0.0), "0.00000000000");
        assert_eq!(format_sig12(9.9999999999999), "10.0000000000");
        assert_eq!(format_sig12(123_456_789_012_345.0), "123456789012345");
    }

    #[test]
    fn empty_results_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out");
        let r = RunResults {
            curves: vec![(CurveKind::IdealTof, EchoPattern::default())],
            ..RunResults::default()
        };
        assert!(matches!(export_csv(&r, &target), Err(Error::EmptyResults)));
        assert!(!target.exists());
    }

    #[test]
    fn files_carry_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let r = RunResults {
            curves: vec![(CurveKind::Smeared, EchoPattern::from_xy(&[1.0, 2.0], &[0.5, -0.25]).unwrap())],
            peaks: vec![(CurveKind::Smeared, Vec::new())],
            provenance: Some("test run".into()),
            ..RunResults::default()
        };
        let paths = export_csv(&r, dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        let text = fs::read_to_string(&paths[0]).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "# test run");
        assert_eq!(lines[1], "xi_nm,lambda_nm,polarization");
        assert_eq!(lines[2], "1.00000000000,,0.500000000000");
        let peaks = fs::read_to_string(&paths[1]).unwrap();
        assert!(peaks.ends_with("order,xi_peak_nm,height,width_nm\n"));
    }

    #[test]
    fn unwritable_target_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        let r = RunResults {
            curves: vec![(CurveKind::IdealTof, EchoPattern::from_xy(&[1.0], &[1.0]).unwrap())],
            ..RunResults::default()
        };
        let err = export_csv(&r, file.join("sub")).unwrap_err();
        assert_eq!(err.category(), "io");
    }
}
