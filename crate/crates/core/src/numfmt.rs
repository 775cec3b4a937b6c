//! Text formatting of floating point output.

/// Formats `x` with six significant digits, in plain notation for moderate
/// magnitudes and scientific notation otherwise, trailing zeros removed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding may bump the exponent (e.g. 999999.5)
    let rounded: f64 = format!("{:.5e}", x).parse().unwrap_or(x);
    let exp = if rounded != 0.0 { rounded.abs().log10().floor() as i32 } else { exp };
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, rounded);
        trim_zeros(&s)
    } else {
        let s = format!("{:.5e}", x);
        match s.split_once('e') {
            Some((mant, e)) => format!("{}e{}", trim_zeros(mant), e),
            None => s,
        }
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(0.123456789), "0.123457");
        assert_eq!(sig6(20.0), "20");
        assert_eq!(sig6(-3.14159265), "-3.14159");
        assert_eq!(sig6(123456789.0), "1.23457e8");
        assert_eq!(sig6(1.5e-7), "1.5e-7");
        assert_eq!(sig6(999999.7), "1e6");
        assert_eq!(sig6(0.95), "0.95");
    }
}
