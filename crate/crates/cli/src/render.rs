//! Presentation helpers: fraction reconstruction for assignment shares and
//! bare-bones CSV emission.

use crate::error::CliError;
use std::fmt::Write as _;
use std::path::Path;

/// Renders a share as an exact-looking fraction when one with a denominator
/// up to 10^4 reproduces it, falling back to six decimals.
pub fn ratio(x: f64) -> String {
    if !x.is_finite() || x < 0.0 {
        return format!("{x:.6}");
    }
    match small_fraction(x, 10_000, 1e-9) {
        Some((p, 1)) => p.to_string(),
        Some((p, q)) => format!("{p}/{q}"),
        None => format!("{x:.6}"),
    }
}

/// Continued-fraction convergents of `x` until one lands within `tol` or the
/// denominator cap is passed.
fn small_fraction(x: f64, max_den: u64, tol: f64) -> Option<(u64, u64)> {
    let (mut p0, mut q0) = (1u64, 0u64);
    let (mut p1, mut q1) = (x.floor() as u64, 1u64);
    let mut v = x;
    loop {
        if (x - p1 as f64 / q1 as f64).abs() <= tol * x.abs().max(1.0) {
            return Some((p1, q1));
        }
        let frac = v - v.floor();
        if frac < 1e-15 {
            return None;
        }
        v = 1.0 / frac;
        let a = v.floor();
        if a >= max_den as f64 {
            return None;
        }
        let p2 = (a as u64).checked_mul(p1)?.checked_add(p0)?;
        let q2 = (a as u64).checked_mul(q1)?.checked_add(q0)?;
        if q2 > max_den {
            return None;
        }
        (p0, q0) = (p1, q1);
        (p1, q1) = (p2, q2);
    }
}

/// Writes a comma-separated file with a header row. Values are emitted as
/// given; callers format numbers with `.` decimal points.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut text = String::new();
    let _ = writeln!(text, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(text, "{}", row.join(","));
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_table_style_fractions() {
        assert_eq!(ratio(0.625), "5/8");
        assert_eq!(ratio(15.0 / 16.0), "15/16");
        assert_eq!(ratio(2.0 / 3.0), "2/3");
        assert_eq!(ratio(4.0 / 25.0), "4/25");
        assert_eq!(ratio(1.0), "1");
        assert_eq!(ratio(0.0), "0");
    }

    #[test]
    fn falls_back_to_decimals() {
        assert_eq!(ratio(0.123456789012), "0.123457");
        assert_eq!(ratio(std::f64::consts::FRAC_1_PI), "0.318310");
        assert_eq!(ratio(f64::NAN), "NaN");
    }
}
