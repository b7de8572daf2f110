//! Number formatting for CSV exports.

/// Formats `x` like C's `%.{digits}g`: `digits` significant digits, trailing zeros trimmed,
/// scientific notation outside `[1e-5, 10^digits)`.
pub fn sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    // Round first so the exponent reflects the rounded value (e.g. 9.9999999996 -> 10).
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

/// Nine significant digits, the precision used by every CSV artifact.
pub fn g9(x: f64) -> String {
    sig(x, 9)
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(g9(0.0), "0");
        assert_eq!(g9(1.0), "1");
        assert_eq!(g9(-0.5), "-0.5");
        assert_eq!(g9(std::f64::consts::PI), "3.14159265");
        assert_eq!(g9(123456789.4), "123456789");
        assert_eq!(g9(1234567890.0), "1.23456789e+09");
        assert_eq!(g9(1.5e-7), "1.5e-07");
        assert_eq!(g9(0.0001), "0.0001");
        assert_eq!(g9(9.9999999996), "10");
    }

    #[test]
    fn nine_digits_round_trip_closely() {
        for &x in &[1.0 / 3.0, -2.718281828459045, 6.02214076e23, 1e-300] {
            let back: f64 = g9(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-8, "{x} -> {back}");
        }
    }
}
