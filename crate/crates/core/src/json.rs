//! Byte-deterministic JSON output.

use serde::Serialize;

/// Pretty JSON with object keys sorted and a trailing newline.
///
/// Going through [`serde_json::Value`] sorts keys because its map type is
/// ordered.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("documents serialize to JSON");
    let mut out = serde_json::to_string_pretty(&value).expect("JSON values print");
    out.push('\n');
    out
}
