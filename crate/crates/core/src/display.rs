//! Number formatting shared by reports.

/// Six significant digits; plain notation for moderate magnitudes,
/// scientific otherwise.
pub fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{v:.5e}").parse().unwrap_or(v);
    let exp = rounded.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{rounded:.decimals$}")
    } else {
        format!("{rounded:.5e}")
    }
}
