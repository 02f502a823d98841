//! Text formatting of floats for every file this crate writes.
//!
//! Values are printed with 9 significant digits in the shortest of fixed or
//! exponent notation, so writing, parsing and re-writing a value yields the
//! same text.

/// Formats `x` with 9 significant digits (C `%.9g` semantics).
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".to_string()
    } else {
        t.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(5438.0), "5438");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(2.5e-6), "2.5e-6");
        assert_eq!(fmt_sig9(-12.7324), "-12.7324");
        assert_eq!(fmt_sig9(3.2768e4), "32768");
        assert_eq!(fmt_sig9(1.23456789e12), "1.23456789e12");
        assert_eq!(fmt_sig9(9.999999999), "10");
    }

    proptest! {
        #[test]
        fn reprint_is_stable(x in -1e15f64..1e15) {
            let once = fmt_sig9(x);
            let parsed: f64 = once.parse().unwrap();
            prop_assert_eq!(fmt_sig9(parsed), once);
        }
    }
}
