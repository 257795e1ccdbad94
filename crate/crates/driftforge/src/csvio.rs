//! Deterministic float formatting for CSV emission.
//!
//! All reports print floats with 17 significant digits, enough to round-trip
//! any f64 exactly, so identical runs produce byte-identical files.

/// Format a float with 17 significant digits in scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::fmt_float;

    #[test]
    fn round_trips_f64_exactly() {
        for &x in &[
            0.0,
            1.0,
            -1.0 / 3.0,
            std::f64::consts::PI,
            6.02214076e23,
            -2.2250738585072014e-308,
        ] {
            let back: f64 = fmt_float(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
