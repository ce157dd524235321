//! Canonical JSON output: object keys sorted, two-space indentation.

use serde::Serialize;

/// Serializes `value` with sorted object keys and a trailing newline.
pub fn to_canonical_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    // `serde_json::Value` keeps objects in a BTreeMap, so a round trip sorts keys.
    let value = serde_json::to_value(value)?;
    let mut out = serde_json::to_string_pretty(&value)?;
    out.push('\n');
    Ok(out)
}
