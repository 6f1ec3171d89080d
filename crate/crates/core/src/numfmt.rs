//! Decimal formatting for the text file formats.

/// Formats `x` rounded to `digits` significant digits, using the shortest
/// decimal form that reproduces the rounded value.
pub fn significant(x: f64, digits: usize) -> String {
    debug_assert!(digits >= 1);
    if x == 0.0 || !x.is_finite() {
        return format!("{}", x);
    }
    let rounded: f64 = format!("{:.*e}", digits - 1, x)
        .parse()
        .expect("scientific notation produced by format! always parses");
    format!("{}", rounded)
}

/// 17 significant digits in scientific notation; parses back to the same bits.
pub fn exact(x: f64) -> String {
    format!("{:.16e}", x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn six_digits() {
        assert_eq!(significant(0.123456789, 6), "0.123457");
        assert_eq!(significant(-1234567.0, 6), "-1234570");
        assert_eq!(significant(1.0, 6), "1");
        assert_eq!(significant(0.0, 6), "0");
    }

    proptest! {
        #[test]
        fn exact_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back: f64 = exact(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }

        #[test]
        fn significant_is_close(x in -1e6f64..1e6) {
            let back: f64 = significant(x, 6).parse().unwrap();
            prop_assert!((back - x).abs() <= x.abs() * 5e-6 + 1e-300);
        }
    }
}
