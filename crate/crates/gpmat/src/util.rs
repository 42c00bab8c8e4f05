//! Small shared helpers.

/// Format a float with 17 significant digits, enough for a lossless
/// round-trip through decimal text. Used by every CSV writer in the crate.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0" wobble in output files
        return "0".to_string();
    }
    format!("{:.16e}", x)
}

/// Parse back what [`fmt_g17`] wrote (plain `f64::from_str` handles both
/// scientific and plain decimal forms).
pub fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn g17_round_trips_bit_exactly(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let back = parse_f64(&fmt_g17(x)).unwrap();
            // -0.0 is written as "0"; both compare equal as floats
            prop_assert!(back == x || (x == 0.0 && back == 0.0));
        }
    }
}
