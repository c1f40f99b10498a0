//! Locale-independent number rendering shared by every tabular export.

/// Significant digits used for all serialized numbers.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Renders `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits, in plain
/// decimal notation with the shortest representation of the rounded value.
///
/// Parsing the output and formatting it again yields the same string.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("scientific notation produced by std always parses");
    if rounded == 0.0 {
        // normalizes -0
        return "0".to_string();
    }
    rounded.to_string()
}
