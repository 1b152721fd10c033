//! Number formatting shared by every CSV / JSON-lines writer.

/// Format `v` with 9 significant digits, `%.9g` style.
///
/// Trailing zeros are trimmed; non-finite values print as `nan`, `inf`, `-inf`.
pub fn sig9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    // Round once in scientific form, then decide the layout from the rounded exponent.
    let sci = format!("{:.8e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, v))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// Join values with commas using [`sig9`].
pub fn join_sig9(values: &[f64]) -> String {
    values.iter().map(|v| sig9(*v)).collect::<Vec<_>>().join(",")
}
