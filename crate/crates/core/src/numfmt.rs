//! Numeric serialization helpers.
//!
//! All floats written to report and record files are rounded to 9 significant
//! digits first, so golden files stay byte-stable across platforms.

/// Round to 9 significant digits by formatting and re-parsing.
///
/// Both `format!` and `str::parse::<f64>` are correctly rounded in Rust, so
/// the result is deterministic everywhere.
pub fn sig9(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{:.8e}", x).parse().expect("formatted float reparses")
}

/// Apply [`sig9`] to every float in a JSON value, in place.
pub fn sig9_json(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.as_i64().is_none() && n.as_u64().is_none() {
                    if let Some(rounded) = serde_json::Number::from_f64(sig9(f)) {
                        *n = rounded;
                    }
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(sig9_json),
        serde_json::Value::Object(map) => map.values_mut().for_each(sig9_json),
        _ => {}
    }
}
